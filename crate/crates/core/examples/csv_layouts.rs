//! Reads subject-level CSV, aggregates it and writes it back out.

use emaxbr::io::{parse_observations, write_observations};
use emaxbr::model::Layout;

fn main() -> emaxbr::Result<()> {
    let text = "dose,y\n0,0\n0,0\n0,1\n25,0\n25,1\n25,1\n100,1\n100,1\n100,1\n";
    let data = parse_observations(text, None)?;
    println!("{} subjects, {} events, {} arms", data.total_n(), data.total_events(), data.arms().len());
    print!("{}", write_observations(&data, Layout::Aggregated));
    let bad = parse_observations("dose,n,events\n0,10,2\n5,10,12\n", None);
    println!("{}", bad.unwrap_err());
    Ok(())
}
