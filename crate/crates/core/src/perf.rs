//! Throughput model of the hardware pipeline.
//!
//! Every IPMC frame entering a BIER-TE domain grows by the BIER-TE header
//! (a fixed part plus the bitstring) and the MPLS label, so a port running
//! at line rate can accept proportionally less IPMC traffic without loss.
//! Each recirculation of a packet consumes one more pass through the
//! pipeline, so n recirculations leave 1/n of the throughput.

use std::fmt::Write as _;

use thiserror::Error;

/// 12 bytes of BIER header without the bitstring plus one 4-byte MPLS label.
pub const DEFAULT_OVERHEAD: u32 = 16;
pub const DEFAULT_LINE_RATE: f64 = 100.0;

/// Hardware measurements reported for the prototype, in Gbit/s. They are
/// kept for comparison only; the model does not reproduce all of them.
pub mod measured {
    /// 1536 B frames, 256-bit bitstring.
    pub const L1536_BSL256: f64 = 96.0;
    /// 1536 B frames, 64-bit bitstring: "above 99".
    pub const L1536_BSL64: f64 = 99.0;
    /// 64 B frames, 64-bit bitstring.
    pub const L64_BSL64: f64 = 88.0;
    /// 64 B frames, 256-bit bitstring.
    pub const L64_BSL256: f64 = 70.0;
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PerfError {
    #[error("frame size must be at least 1 byte")]
    FrameSize,
    #[error("bitstring length {0} outside 8..=256")]
    Bsl(u32),
    #[error("line rate {0} must be positive and finite")]
    LineRate(f64),
}

/// One point of the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerfQuery {
    /// IPMC frame size in bytes.
    pub l_ipmc: u32,
    /// Bitstring length in bits.
    pub bsl: u32,
    /// Bytes added per frame besides the bitstring.
    pub fixed_overhead: u32,
    /// Gbit/s.
    pub line_rate: f64,
}

impl PerfQuery {
    pub fn new(l_ipmc: u32, bsl: u32) -> Result<Self, PerfError> {
        let q = PerfQuery {
            l_ipmc,
            bsl,
            fixed_overhead: DEFAULT_OVERHEAD,
            line_rate: DEFAULT_LINE_RATE,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<(), PerfError> {
        if self.l_ipmc == 0 {
            return Err(PerfError::FrameSize);
        }
        if !(8..=256).contains(&self.bsl) {
            return Err(PerfError::Bsl(self.bsl));
        }
        if !(self.line_rate.is_finite() && self.line_rate > 0.0) {
            return Err(PerfError::LineRate(self.line_rate));
        }
        Ok(())
    }

    /// Header bytes added inside the domain.
    pub fn l_bierte(&self) -> f64 {
        self.fixed_overhead as f64 + self.bsl as f64 / 8.0
    }
}

/// Maximum IPMC input rate without loss, in Gbit/s.
pub fn r_max(q: &PerfQuery) -> f64 {
    let l = q.l_ipmc as f64;
    q.line_rate * l / (l + q.l_bierte())
}

/// Throughput left after `n_recirc` passes; no penalty for zero.
pub fn replication_throughput(line_rate: f64, n_recirc: u32) -> f64 {
    if n_recirc == 0 {
        line_rate
    } else {
        line_rate / n_recirc as f64
    }
}

/// One row per (frame size, bitstring length), frame sizes outermost.
pub fn curve(
    frames: &[u32],
    bsls: &[u32],
    overhead: u32,
    line_rate: f64,
) -> Result<Vec<(u32, u32, f64)>, PerfError> {
    let mut rows = Vec::with_capacity(frames.len() * bsls.len());
    for &l_ipmc in frames {
        for &bsl in bsls {
            let q = PerfQuery {
                l_ipmc,
                bsl,
                fixed_overhead: overhead,
                line_rate,
            };
            q.validate()?;
            rows.push((l_ipmc, bsl, r_max(&q)));
        }
    }
    Ok(rows)
}

pub fn curve_csv(rows: &[(u32, u32, f64)]) -> String {
    let mut s = String::from("l_ipmc,bsl,r_max_gbps\n");
    for (l, b, r) in rows {
        writeln!(s, "{l},{b},{r:.4}").expect("write to string");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(l: u32, bsl: u32, overhead: u32) -> PerfQuery {
        PerfQuery {
            l_ipmc: l,
            bsl,
            fixed_overhead: overhead,
            line_rate: 100.0,
        }
    }

    #[test]
    fn reference_points() {
        assert!((r_max(&q(1536, 256, 16)) - 96.97).abs() < 0.01);
        assert!((r_max(&q(64, 64, 16)) - 72.73).abs() < 0.01);
        assert!((r_max(&q(1536, 64, 16)) - 98.46).abs() < 0.01);
        assert!((r_max(&q(1536, 64, 4)) - 99.22).abs() < 0.01);
        // 64-byte frames at 256 bits stay below the measured value even
        // without any fixed overhead
        assert!(r_max(&q(64, 256, 0)) < measured::L64_BSL256);
    }

    #[test]
    fn recirculation_penalty() {
        assert_eq!(replication_throughput(100.0, 0), 100.0);
        assert_eq!(replication_throughput(100.0, 1), 100.0);
        assert_eq!(replication_throughput(100.0, 2), 50.0);
        assert_eq!(replication_throughput(100.0, 4), 25.0);
    }

    #[test]
    fn query_validation() {
        assert_eq!(PerfQuery::new(0, 64), Err(PerfError::FrameSize));
        assert_eq!(PerfQuery::new(64, 4), Err(PerfError::Bsl(4)));
        assert!(curve(&[64], &[512], 16, 100.0).is_err());
    }

    #[test]
    fn csv_shape() {
        let rows = curve(&[64, 1536], &[64, 256], 16, 100.0).unwrap();
        let csv = curve_csv(&rows);
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.starts_with("l_ipmc,bsl,r_max_gbps\n64,64,72.7273\n"));
    }

    proptest! {
        #[test]
        fn bounded_and_monotone(l in 1u32..9000, bsl in 8u32..256, o in 0u32..64) {
            let base = r_max(&q(l, bsl, o));
            prop_assert!(base < 100.0 && base > 0.0);
            prop_assert!(r_max(&q(l + 1, bsl, o)) > base);
            prop_assert!(r_max(&q(l, bsl + 1, o)) < base);
            prop_assert!(r_max(&q(l, bsl, o + 1)) < base);
        }
    }
}
