//! Converter stub for the Brazilian distribution geographic database (BDGD).
//!
//! Not implemented. The intended mapping onto this crate's input files:
//!
//! | input file        | BDGD layer                        | fields                                  |
//! |-------------------|-----------------------------------|-----------------------------------------|
//! | `topology.json`   | medium-voltage segments (SSDMT)   | `COD_ID`, `PAC_1`, `PAC_2`, `COMP` (m)  |
//! | `buses.csv` phase | MV/LV consumer units (UCMT, UCBT) | `PAC`, `FAS_CON` (`A`, `AB`, `ABC`, ..) |
//! | `buses.csv` kW    | consumer units                    | monthly energy `ENE_01`..`ENE_12`       |
//! | `reliability.csv` | consumer units                    | `DIC`/`FIC` monthly duration, frequency |
//! | `lines.csv`       | segments joined to conductor code | `TIP_CND` -> R1, X1 per km              |
//!
//! Consumer units aggregate to their connection point (`PAC`). Neutral
//! suffixes in `FAS_CON` (`AN`, `ABN`) drop the `N`. Segment length is in
//! metres and converts to km. Kilowatt demand comes from monthly energy
//! divided by the hours in the month, scaled by a load factor the caller
//! supplies.

use std::path::Path;

use crate::error::{Error, Result};

/// Convert a BDGD extract in `src` into gridsynth inputs in `dst`.
pub fn convert(_src: &Path, _dst: &Path) -> Result<()> {
    Err(Error::Format("BDGD conversion is not implemented; see the module docs for the field mapping".into()))
}
