//! Versioned binary layout of a [`TrainedTracker`]. All integers are
//! little-endian `u64`, all reals little-endian `f64`, matrices row-major:
//!
//! ```text
//! magic "PTRK" | version u32
//! D_r | D′ | mask_len | mask[mask_len]
//! spectral_radius input_scaling leakage density bias_scaling ridge | washout
//! seed
//! W_r[D_r × D_r] | W_in[D_r × D′] | b[D_r] | W_out[D_r + 1]
//! gain offset | input_mean[D′] | input_std[D′]
//! ```

use std::io::{Read, Write};

use super::{InputScaler, Readout, ReservoirHyperparams, ReservoirMatrices, TrainedTracker, Calibration};
use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, Matrix};
use crate::scalar::Real;

pub const BUNDLE_MAGIC: &[u8; 4] = b"PTRK";
pub const BUNDLE_VERSION: u32 = 1;

const MAX_DIM: u64 = 1 << 16;

fn put_u64(w: &mut impl Write, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_reals<T: Real>(w: &mut impl Write, vals: impl IntoIterator<Item = T>) -> Result<()> {
    for v in vals {
        w.write_all(&v.as_f64().to_le_bytes())?;
    }
    Ok(())
}

pub fn write_bundle<T: Real>(t: &TrainedTracker<T>, w: &mut impl Write) -> Result<()> {
    let n = t.matrices.size();
    let d = t.matrices.input_dim();
    w.write_all(BUNDLE_MAGIC)?;
    w.write_all(&BUNDLE_VERSION.to_le_bytes())?;
    put_u64(w, n as u64)?;
    put_u64(w, d as u64)?;
    put_u64(w, t.mask.len() as u64)?;
    for &m in &t.mask {
        put_u64(w, m as u64)?;
    }
    let h = &t.hyper;
    put_reals(
        w,
        [h.spectral_radius, h.input_scaling, h.leakage, h.density, h.bias_scaling, h.ridge],
    )?;
    put_u64(w, h.washout as u64)?;
    put_u64(w, t.matrices.seed)?;
    put_reals(w, t.matrices.recurrent.to_dense().as_slice().iter().copied())?;
    put_reals(w, t.matrices.input.as_slice().iter().copied())?;
    put_reals(w, t.matrices.bias.iter().copied())?;
    put_reals(w, t.readout.weights.iter().copied())?;
    put_reals(w, [t.calibration.gain, t.calibration.offset])?;
    put_reals(w, t.input_stats.mean.iter().copied())?;
    put_reals(w, t.input_stats.std.iter().copied())?;
    Ok(())
}

struct Reader<'a, R> {
    r: &'a mut R,
}

impl<R: Read> Reader<'_, R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.r
            .read_exact(&mut buf)
            .map_err(|e| Error::Bundle(format!("truncated bundle: {e}")))?;
        Ok(buf)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    fn dim(&mut self, what: &str) -> Result<usize> {
        let v = self.u64()?;
        if v == 0 || v > MAX_DIM {
            return Err(Error::Bundle(format!("implausible {what} {v}")));
        }
        Ok(v as usize)
    }

    fn reals<T: Real>(&mut self, n: usize) -> Result<Vec<T>> {
        (0..n).map(|_| Ok(T::lit(f64::from_le_bytes(self.bytes()?)))).collect()
    }
}

pub fn read_bundle<T: Real>(r: &mut impl Read) -> Result<TrainedTracker<T>> {
    let mut rd = Reader { r };
    if &rd.bytes::<4>()? != BUNDLE_MAGIC {
        return Err(Error::Bundle("not a tracker bundle (bad magic)".into()));
    }
    let version = u32::from_le_bytes(rd.bytes()?);
    if version != BUNDLE_VERSION {
        return Err(Error::Bundle(format!("unsupported bundle version {version}")));
    }
    let n = rd.dim("reservoir size")?;
    let d = rd.dim("input dimension")?;
    let mask_len = rd.dim("mask length")?;
    let mask = (0..mask_len).map(|_| rd.u64().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
    let h: Vec<T> = rd.reals(6)?;
    let washout = rd.u64()? as usize;
    let hyper = ReservoirHyperparams {
        size: n,
        spectral_radius: h[0],
        input_scaling: h[1],
        leakage: h[2],
        density: h[3],
        bias_scaling: h[4],
        ridge: h[5],
        washout,
    };
    let seed = rd.u64()?;
    let recurrent = CsrMatrix::from_dense(&Matrix::from_vec(n, n, rd.reals(n * n)?));
    let input = Matrix::from_vec(n, d, rd.reals(n * d)?);
    let bias = rd.reals(n)?;
    let weights = rd.reals(n + 1)?;
    let c: Vec<T> = rd.reals(2)?;
    let mean = rd.reals(d)?;
    let std = rd.reals(d)?;
    if mask_len != d {
        return Err(Error::Bundle("mask length differs from input dimension".into()));
    }
    Ok(TrainedTracker {
        matrices: ReservoirMatrices {
            recurrent,
            input,
            bias,
            seed,
        },
        readout: Readout { weights },
        calibration: Calibration {
            gain: c[0],
            offset: c[1],
        },
        hyper,
        input_stats: InputScaler { mean, std },
        mask,
    })
}
