//! 16-bit PCM WAV import and export.

use super::{AcousticsError, BinauralFrame, Waveform};
use std::io::{Read, Seek, Write};

fn to_i16(s: f64) -> i16 {
    (s.clamp(-1.0, 1.0) * i16::MAX as f64).round() as i16
}

fn spec(channels: u16, sample_rate: u32) -> hound::WavSpec {
    hound::WavSpec {
        channels,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    }
}

pub fn write_wav_mono<W: Write + Seek>(w: &Waveform, out: W) -> Result<(), AcousticsError> {
    let mut writer = hound::WavWriter::new(out, spec(1, w.sample_rate))?;
    for s in &w.samples {
        writer.write_sample(to_i16(*s))?;
    }
    writer.finalize()?;
    Ok(())
}

/// Interleaved left/right.
pub fn write_wav_stereo<W: Write + Seek>(frame: &BinauralFrame, out: W) -> Result<(), AcousticsError> {
    let mut writer = hound::WavWriter::new(out, spec(2, frame.left.sample_rate))?;
    for (l, r) in frame.left.samples.iter().zip(&frame.right.samples) {
        writer.write_sample(to_i16(*l))?;
        writer.write_sample(to_i16(*r))?;
    }
    writer.finalize()?;
    Ok(())
}

/// Reads a 16-bit PCM file, averaging channels down to mono.
pub fn read_wav_mono<R: Read>(input: R) -> Result<Waveform, AcousticsError> {
    let mut reader = hound::WavReader::new(input)?;
    let spec = reader.spec();
    if spec.bits_per_sample != 16 || spec.sample_format != hound::SampleFormat::Int {
        return Err(AcousticsError::Format("expected 16-bit integer PCM".into()));
    }
    let channels = spec.channels.max(1) as usize;
    let raw: Vec<i16> = reader.samples::<i16>().collect::<Result<_, _>>()?;
    let samples = raw
        .chunks(channels)
        .map(|c| c.iter().map(|s| *s as f64 / i16::MAX as f64).sum::<f64>() / channels as f64)
        .collect();
    Ok(Waveform {
        samples,
        sample_rate: spec.sample_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn mono_round_trip_within_quantization() {
        let w = Waveform::new((0..400).map(|i| (i as f64 * 0.05).sin() * 0.8).collect());
        let mut buf = Cursor::new(Vec::new());
        write_wav_mono(&w, &mut buf).unwrap();
        let bytes = buf.into_inner();
        assert_eq!(&bytes[..4], b"RIFF");
        assert_eq!(&bytes[8..12], b"WAVE");
        let back = read_wav_mono(Cursor::new(bytes)).unwrap();
        assert_eq!(back.sample_rate, 16_000);
        for (a, b) in w.samples.iter().zip(&back.samples) {
            assert!((a - b).abs() <= 1.0 / 32767.0);
        }
    }

    #[test]
    fn stereo_header_has_two_channels() {
        let f = BinauralFrame::silent(10);
        let mut buf = Cursor::new(Vec::new());
        write_wav_stereo(&f, &mut buf).unwrap();
        let r = hound::WavReader::new(Cursor::new(buf.into_inner())).unwrap();
        assert_eq!(r.spec().channels, 2);
        assert_eq!(r.len(), 20);
    }
}
