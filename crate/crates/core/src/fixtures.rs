//! Bundled default data.

use serde::Deserialize;

use crate::store::HwPerfRecord;

/// Four synthetic hardware tiers topping out at INT4, INT8, FP16 and FP32.
pub const HWPERF_V1: &str = include_str!("../fixtures/hwperf_v1.json");

#[derive(Deserialize)]
struct HwPerfFixture {
    version: u32,
    records: Vec<HwPerfRecord>,
}

/// The default tiers, lowest first.
pub fn default_hw_records() -> Vec<HwPerfRecord> {
    let fixture: HwPerfFixture = serde_json::from_str(HWPERF_V1).expect("bundled fixture parses");
    debug_assert_eq!(fixture.version, 1);
    fixture.records
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::QuantizationLevel;

    #[test]
    fn tiers_are_valid_and_ordered() {
        let records = default_hw_records();
        assert_eq!(records.len(), 4);
        for (i, r) in records.iter().enumerate() {
            r.validate().unwrap();
            assert_eq!(r.hardware.max_level(), QuantizationLevel::ALL[i]);
        }
    }
}
