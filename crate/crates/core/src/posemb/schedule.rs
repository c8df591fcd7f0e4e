use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::PosEmbError;

/// Per-dimension angular frequencies of one attention head.
///
/// `frequencies[m]` is the unclipped `theta^(-2m/head_dim)`; `zeroed_mask[m]`
/// marks the entries replaced by the zero frequency (those that do not finish
/// a single cycle over `train_length` positions).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencySchedule {
    pub head_dim: usize,
    pub base_theta: f64,
    pub train_length: usize,
    pub frequencies: Vec<f64>,
    pub zeroed_mask: Vec<bool>,
}

/// `2 pi / N`: the lowest frequency that completes one cycle over `N` positions.
pub fn floor_frequency(train_length: usize) -> f64 {
    TAU / train_length as f64
}

fn validate(head_dim: usize, base_theta: f64, train_length: usize) -> Result<(), PosEmbError> {
    if head_dim % 2 != 0 {
        return Err(PosEmbError::OddHeadDim(head_dim));
    }
    if head_dim < 4 {
        return Err(PosEmbError::Invalid(format!("head_dim {head_dim} < 4")));
    }
    if !(base_theta > 1.0) {
        return Err(PosEmbError::Invalid(format!("base_theta {base_theta} must exceed 1")));
    }
    if train_length < 2 {
        return Err(PosEmbError::Invalid(format!("train_length {train_length} < 2")));
    }
    Ok(())
}

/// RoPE frequencies for a head, optionally zeroing those below the floor frequency.
pub fn build_schedule(
    head_dim: usize,
    base_theta: f64,
    train_length: usize,
    clip: bool,
) -> Result<FrequencySchedule, PosEmbError> {
    validate(head_dim, base_theta, train_length)?;
    let half = head_dim / 2;
    let frequencies: Vec<f64> = (0..half)
        .map(|m| base_theta.powf(-((2 * m) as f64) / head_dim as f64))
        .collect();
    let floor = floor_frequency(train_length);
    let zeroed_mask = frequencies.iter().map(|&w| clip && w < floor).collect();
    Ok(FrequencySchedule {
        head_dim,
        base_theta,
        train_length,
        frequencies,
        zeroed_mask,
    })
}

/// RoPE frequencies moved to the nearest value that completes a whole number
/// of cycles over `train_length`, never fewer than one cycle.
pub fn rope_a_schedule(
    head_dim: usize,
    base_theta: f64,
    train_length: usize,
) -> Result<FrequencySchedule, PosEmbError> {
    let mut s = build_schedule(head_dim, base_theta, train_length, false)?;
    let n = train_length as f64;
    for w in &mut s.frequencies {
        let cycles = (n * *w / TAU).round().max(1.0);
        *w = TAU * cycles / n;
    }
    Ok(s)
}

impl FrequencySchedule {
    pub fn half(&self) -> usize {
        self.head_dim / 2
    }

    /// Frequencies with zeroed entries replaced by 0.
    pub fn effective(&self) -> Vec<f64> {
        self.frequencies
            .iter()
            .zip(&self.zeroed_mask)
            .map(|(&w, &z)| if z { 0.0 } else { w })
            .collect()
    }

    /// Indices `m` that keep their frequency.
    pub fn retained(&self) -> Vec<usize> {
        (0..self.half()).filter(|&m| !self.zeroed_mask[m]).collect()
    }

    pub fn num_zeroed(&self) -> usize {
        self.zeroed_mask.iter().filter(|&&z| z).count()
    }

    /// Same frequencies with clipping removed.
    pub fn unclipped(&self) -> FrequencySchedule {
        FrequencySchedule {
            zeroed_mask: vec![false; self.half()],
            ..self.clone()
        }
    }

    /// `N * omega / 2 pi` per dimension.
    pub fn cycle_counts(&self) -> Vec<f64> {
        let n = self.train_length as f64;
        self.frequencies.iter().map(|w| n * w / TAU).collect()
    }

    pub fn check_invariants(&self) -> Result<(), PosEmbError> {
        if self.frequencies.len() != self.half() || self.zeroed_mask.len() != self.half() {
            return Err(PosEmbError::Invalid("schedule length mismatch".into()));
        }
        if self.frequencies.iter().any(|&w| !(0.0..=PI).contains(&w)) {
            return Err(PosEmbError::Invalid("frequency outside [0, pi]".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn llama_geometry_zeroes_46_to_63() {
        let s = build_schedule(128, 10000.0, 4096, true).unwrap();
        let zeroed: Vec<usize> = (0..64).filter(|&m| s.zeroed_mask[m]).collect();
        assert_eq!(zeroed, (46..64).collect::<Vec<_>>());
        // omega_45 = 10000^(-90/128) finishes 1.0039 cycles, just over the floor
        let r = s.cycle_counts();
        assert!((r[45] - 1.003_876).abs() < 1e-6);
        assert!(r[46] < 1.0);
    }

    #[test]
    fn tiny_head_with_huge_context_keeps_everything() {
        let s = build_schedule(4, 10000.0, usize::MAX / 4, true).unwrap();
        // floor frequency is ~0, so nothing is clipped
        assert!(s.zeroed_mask.iter().all(|z| !z));
    }

    #[test]
    fn theta_100_n_4_clips_below_half_pi() {
        let s = build_schedule(8, 100.0, 4, true).unwrap();
        // omega = 100^(-m/4) = 1, 0.316, 0.1, 0.0316: every one is under pi/2
        let expected: Vec<bool> = s.frequencies.iter().map(|&w| w < PI / 2.0).collect();
        assert_eq!(s.zeroed_mask, expected);
        assert_eq!(s.zeroed_mask, vec![true; 4]);
    }

    #[test]
    fn unclipped_schedule_has_no_zeroes() {
        let s = build_schedule(128, 10000.0, 4096, false).unwrap();
        assert_eq!(s.num_zeroed(), 0);
        assert_eq!(s.effective(), s.frequencies);
    }

    #[test]
    fn odd_head_dim_rejected() {
        assert_eq!(
            build_schedule(7, 10000.0, 64, true).unwrap_err(),
            PosEmbError::OddHeadDim(7)
        );
        assert!(build_schedule(2, 10000.0, 64, true).is_err());
        assert!(build_schedule(8, 1.0, 64, true).is_err());
        assert!(build_schedule(8, 10.0, 1, true).is_err());
    }

    #[test]
    fn rope_a_completes_integer_cycles() {
        let s = rope_a_schedule(8, 100.0, 64).unwrap();
        for r in s.cycle_counts() {
            assert!((r - r.round()).abs() < 1e-9 && r.round() >= 1.0, "{r}");
        }
        assert_eq!(s.num_zeroed(), 0);
    }

    #[test]
    fn rope_a_leaves_whole_cycles_alone() {
        // adjusting an already adjusted schedule is a no-op
        let once = rope_a_schedule(16, 10000.0, 64).unwrap();
        let n = 64.0;
        for &w in &once.frequencies {
            let again = TAU * (n * w / TAU).round().max(1.0) / n;
            assert_eq!(again, w);
        }
    }
}
