use super::{AcousticsError, ImpulseResponse, Waveform};

/// Full discrete linear convolution; the output has `source.len() + rir.len() - 1`
/// samples. Zero taps are skipped, which leaves the sums unchanged.
pub fn convolve(source: &Waveform, rir: &ImpulseResponse) -> Result<Waveform, AcousticsError> {
    if source.sample_rate != rir.sample_rate {
        return Err(AcousticsError::RateMismatch(source.sample_rate, rir.sample_rate));
    }
    if source.is_empty() || rir.taps.is_empty() {
        return Ok(Waveform {
            samples: Vec::new(),
            sample_rate: source.sample_rate,
        });
    }
    let n = source.len() + rir.taps.len() - 1;
    let mut out = vec![0.0; n];
    convolve_into(&source.samples, &rir.taps, &mut out);
    Ok(Waveform {
        samples: out,
        sample_rate: source.sample_rate,
    })
}

/// Accumulates `signal * taps` into `out`, dropping anything past `out.len()`.
pub(crate) fn convolve_into(signal: &[f64], taps: &[f64], out: &mut [f64]) {
    // Output index order matches the schoolbook sum over taps for each sample.
    let nonzero: Vec<(usize, f64)> = taps
        .iter()
        .enumerate()
        .filter(|(_, t)| **t != 0.0)
        .map(|(i, t)| (i, *t))
        .collect();
    for (n, slot) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for &(k, t) in &nonzero {
            if k > n {
                break;
            }
            if let Some(x) = signal.get(n - k) {
                acc += x * t;
            }
        }
        *slot += acc;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::Vec2;

    fn ir(taps: Vec<f64>) -> ImpulseResponse {
        ImpulseResponse {
            taps,
            sample_rate: 16_000,
            source: Vec2::ZERO,
            ear: Vec2::ZERO,
        }
    }

    #[test]
    fn unit_impulse_reproduces_taps() {
        let r = ir(vec![0.0, 0.5, 0.0, -0.25, 0.1]);
        let out = convolve(&Waveform::new(vec![1.0]), &r).unwrap();
        assert_eq!(out.samples, r.taps);
    }

    #[test]
    fn output_length() {
        let out = convolve(&Waveform::new(vec![1.0; 10]), &ir(vec![1.0; 4])).unwrap();
        assert_eq!(out.len(), 13);
        assert_eq!(out.samples[3], 4.0);
    }

    #[test]
    fn rate_mismatch() {
        let mut w = Waveform::new(vec![1.0]);
        w.sample_rate = 8000;
        assert!(matches!(convolve(&w, &ir(vec![1.0])), Err(AcousticsError::RateMismatch(8000, 16000))));
    }
}
