//! Step-size schedules and horizon blocking.

use crate::error::{invalid, Result};

/// Mono-DMFW gradient-tracking step for phase `k` of `phases`:
/// `2 / (k + 3)^{2/3}` up to `floor(K/2) + 1`, then `1.5 / (K - k + 2)^{2/3}`.
pub fn mono_dmfw_eta(k: usize, phases: usize) -> Result<f64> {
    if k == 0 || k > phases {
        return Err(invalid(format!("phase {k} outside 1..={phases}")));
    }
    Ok(if k <= phases / 2 + 1 {
        2.0 / ((k + 3) as f64).powf(2.0 / 3.0)
    } else {
        1.5 / ((phases - k + 2) as f64).powf(2.0 / 3.0)
    })
}

/// `1 / sqrt(t)` for `t >= 1`.
pub fn dobga_eta(t: usize) -> Result<f64> {
    if t == 0 {
        return Err(invalid("rounds are numbered from 1"));
    }
    Ok(1.0 / (t as f64).sqrt())
}

/// `(K, Q)` with `K = 2^ceil(0.6 log2 T)` and `Q = T / K`, for `T` a power
/// of two.
pub fn suggest_blocking(rounds: usize) -> Result<(usize, usize)> {
    if !rounds.is_power_of_two() {
        return Err(invalid(format!(
            "horizon {rounds} is not a power of two; choose K and Q explicitly"
        )));
    }
    let log = rounds.trailing_zeros() as f64;
    let k = 1usize << (0.6 * log).ceil() as u32;
    Ok((k, rounds / k))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mono_schedule_examples() {
        assert!((mono_dmfw_eta(1, 10).unwrap() - 0.793_700_5).abs() < 1e-6);
        assert!((mono_dmfw_eta(10, 10).unwrap() - 0.944_941_2).abs() < 1e-6);
        // 2 / 9^{2/3} = 2 / 4.326749.
        assert!((mono_dmfw_eta(6, 10).unwrap() - 0.462_241).abs() < 1e-6);
        assert!((mono_dmfw_eta(7, 10).unwrap() - 1.5 / 5f64.powf(2.0 / 3.0)).abs() < 1e-12);
        assert!(mono_dmfw_eta(0, 10).is_err());
        assert!(mono_dmfw_eta(11, 10).is_err());
    }

    #[test]
    fn mono_schedule_odd_boundary() {
        // K = 7: first branch through floor(7/2) + 1 = 4.
        assert_eq!(mono_dmfw_eta(4, 7).unwrap(), 2.0 / 7f64.powf(2.0 / 3.0));
        assert_eq!(mono_dmfw_eta(5, 7).unwrap(), 1.5 / 4f64.powf(2.0 / 3.0));
    }

    #[test]
    fn mono_schedule_in_unit_interval() {
        for big_k in 1..60 {
            for k in 1..=big_k {
                let e = mono_dmfw_eta(k, big_k).unwrap();
                assert!(e > 0.0 && e <= 1.0);
            }
        }
    }

    #[test]
    fn dobga_schedule_examples() {
        assert_eq!(dobga_eta(1).unwrap(), 1.0);
        assert_eq!(dobga_eta(4).unwrap(), 0.5);
        assert!((dobga_eta(100).unwrap() - 0.1).abs() < 1e-15);
        assert!(dobga_eta(0).is_err());
    }

    #[test]
    fn blocking() {
        assert_eq!(suggest_blocking(256).unwrap(), (32, 8));
        assert_eq!(suggest_blocking(64).unwrap(), (16, 4));
        assert_eq!(suggest_blocking(1).unwrap(), (1, 1));
        assert!(suggest_blocking(200).is_err());
    }
}
