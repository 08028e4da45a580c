use crate::error::{Error, Result};

use super::{CcdFrame, CcdParams, FrameMeta, GainDist};

/// Binary 16-bit PGM with big-endian samples and the camera settings in a
/// comment line.
pub fn write_pgm(frame: &CcdFrame) -> Vec<u8> {
    let c = &frame.meta.ccd;
    let gain = match c.gain_dist {
        GainDist::Exponential => "exponential",
        GainDist::Fixed => "fixed",
    };
    let header = format!(
        "P5\n# seed={} gain_g={} readout_rms_r={} bin_factor={} roi_super_pixels={} offset={} \
         counts_per_photon={} psf_sigma={} gain_dist={}\n{} {}\n65535\n",
        frame.meta.seed,
        c.gain_g,
        c.readout_rms_r,
        c.bin_factor,
        c.roi_super_pixels,
        c.offset,
        c.counts_per_photon,
        c.psf_sigma,
        gain,
        frame.width,
        frame.height
    );
    let mut out = header.into_bytes();
    out.reserve(frame.pixels.len() * 2);
    for p in &frame.pixels {
        out.extend_from_slice(&p.to_be_bytes());
    }
    out
}

/// Reads a frame written by [`write_pgm`]. Missing metadata falls back to
/// default camera settings.
pub fn read_pgm(bytes: &[u8]) -> Result<CcdFrame> {
    let mut pos = 0;
    let mut tokens: Vec<String> = Vec::new();
    let mut meta = FrameMeta {
        ccd: CcdParams::default(),
        seed: 0,
    };
    while tokens.len() < 4 {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::parse("truncated PGM header"))?;
        let line = std::str::from_utf8(&bytes[pos..pos + end])
            .map_err(|_| Error::parse("PGM header is not text"))?;
        pos += end + 1;
        if let Some(comment) = line.strip_prefix('#') {
            for kv in comment.split_whitespace() {
                if let Some((k, v)) = kv.split_once('=') {
                    apply_meta(&mut meta, k, v)?;
                }
            }
            continue;
        }
        tokens.extend(line.split_whitespace().map(str::to_string));
    }
    if tokens[0] != "P5" {
        return Err(Error::parse(format!(
            "expected P5 magic, found `{}`",
            tokens[0]
        )));
    }
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::parse(format!("bad PGM header field `{s}`")))
    };
    let (width, height, maxval) = (parse(&tokens[1])?, parse(&tokens[2])?, parse(&tokens[3])?);
    if !(256..=65535).contains(&maxval) {
        return Err(Error::parse(format!(
            "only 16-bit PGM is supported, maxval {maxval}"
        )));
    }
    let body = &bytes[pos..];
    if body.len() != width * height * 2 {
        return Err(Error::parse(format!(
            "PGM body has {} bytes, expected {}",
            body.len(),
            width * height * 2
        )));
    }
    let pixels = body
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]))
        .collect();
    Ok(CcdFrame {
        width,
        height,
        pixels,
        meta,
    })
}

fn apply_meta(meta: &mut FrameMeta, key: &str, value: &str) -> Result<()> {
    let num = || {
        value
            .parse::<f64>()
            .map_err(|_| Error::parse(format!("bad PGM metadata {key}={value}")))
    };
    let int = || {
        value
            .parse::<u32>()
            .map_err(|_| Error::parse(format!("bad PGM metadata {key}={value}")))
    };
    let c = &mut meta.ccd;
    match key {
        "seed" => {
            meta.seed = value
                .parse()
                .map_err(|_| Error::parse(format!("bad PGM seed `{value}`")))?
        }
        "gain_g" => c.gain_g = num()?,
        "readout_rms_r" => c.readout_rms_r = num()?,
        "bin_factor" => c.bin_factor = int()?,
        "roi_super_pixels" => c.roi_super_pixels = int()?,
        "offset" => c.offset = num()?,
        "counts_per_photon" => c.counts_per_photon = num()?,
        "psf_sigma" => c.psf_sigma = num()?,
        "gain_dist" => c.gain_dist = value.parse()?,
        _ => {}
    }
    Ok(())
}
