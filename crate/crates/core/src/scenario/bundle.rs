//! Ensembles of simulated paths under one scenario control.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gspec::GSpec;
use crate::rng::{path_rng, PURPOSE_NOISE};
use crate::scenario::{TimeGrid, VolControl};

const BINARY_MAGIC: &[u8; 4] = b"GXPB";
const BINARY_VERSION: u32 = 1;

/// Paths of `(W, B, <B>)` under a scenario control, with the realized control.
///
/// Path `p` of the bundle is global path `first_path + p` of its seed, so
/// bundles simulated in chunks concatenate to the bundle simulated at once.
/// Grid-point arrays (`w`, `b`, `qv`) have `n_steps + 1` entries per path,
/// step arrays (`h`) have `n_steps`.
#[derive(Clone, Debug, PartialEq)]
pub struct PathBundle {
    grid: TimeGrid,
    n_paths: usize,
    first_path: u64,
    seed: u64,
    control: String,
    w: Vec<f64>,
    h: Vec<f64>,
    b: Vec<f64>,
    qv: Vec<f64>,
}

impl PathBundle {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn first_path(&self) -> u64 {
        self.first_path
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Descriptor of the control the bundle was simulated under.
    pub fn control(&self) -> &str {
        &self.control
    }

    fn points(&self) -> usize {
        self.grid.n_steps() + 1
    }

    /// Driving Brownian motion `W` at grid times.
    pub fn w(&self, p: usize) -> &[f64] {
        &self.w[p * self.points()..(p + 1) * self.points()]
    }

    /// Realized volatility on each step.
    pub fn h(&self, p: usize) -> &[f64] {
        let n = self.grid.n_steps();
        &self.h[p * n..(p + 1) * n]
    }

    pub fn b(&self, p: usize) -> &[f64] {
        &self.b[p * self.points()..(p + 1) * self.points()]
    }

    /// Realized quadratic variation `sum h_i^2 dt`.
    pub fn qv(&self, p: usize) -> &[f64] {
        &self.qv[p * self.points()..(p + 1) * self.points()]
    }

    pub fn terminal_b(&self) -> Vec<f64> {
        (0..self.n_paths)
            .map(|p| self.b(p)[self.grid.n_steps()])
            .collect()
    }

    pub fn terminal_qv(&self) -> Vec<f64> {
        (0..self.n_paths)
            .map(|p| self.qv(p)[self.grid.n_steps()])
            .collect()
    }

    /// Number of steps, over all paths, whose qv increment leaves
    /// `[sigma_lo^2 dt, sigma_hi^2 dt]` by more than `slack`.
    pub fn band_violations(&self, spec: &GSpec, slack: f64) -> usize {
        let dt = self.grid.dt();
        let lo = spec.sigma_lo_sq() * dt - slack;
        let hi = spec.sigma_hi_sq() * dt + slack;
        (0..self.n_paths)
            .map(|p| {
                self.qv(p)
                    .windows(2)
                    .filter(|w| {
                        let d = w[1] - w[0];
                        d < lo || d > hi
                    })
                    .count()
            })
            .sum()
    }

    /// Columnar CSV `path_id,t,W,h,B,qv`, one row per path and grid time;
    /// `h` is empty on the terminal row of each path.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["path_id", "t", "W", "h", "B", "qv"])?;
        let n = self.grid.n_steps();
        for p in 0..self.n_paths {
            let id = (self.first_path + p as u64).to_string();
            let (ws, hs, bs, qs) = (self.w(p), self.h(p), self.b(p), self.qv(p));
            for i in 0..=n {
                let h = if i < n {
                    hs[i].to_string()
                } else {
                    String::new()
                };
                w.write_record([
                    id.as_str(),
                    &self.grid.time(i).to_string(),
                    &ws[i].to_string(),
                    &h,
                    &bs[i].to_string(),
                    &qs[i].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a bundle written by [`PathBundle::write_csv`]. Seed and control
    /// are not part of the CSV layout; they are filled from the arguments.
    pub fn read_csv<R: Read>(input: R, seed: u64, control: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut ids: Vec<u64> = Vec::new();
        let mut times = Vec::new();
        let (mut w, mut h, mut b, mut qv) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        let mut rows_per_path: Option<usize> = None;
        let mut row_in_path = 0usize;
        for record in r.records() {
            let rec = record?;
            let field = |k: usize| rec.get(k).unwrap_or("");
            let id: u64 = field(0)
                .parse()
                .map_err(|_| Error::Format(format!("bad path id `{}`", field(0))))?;
            if ids.last() != Some(&id) {
                if !ids.is_empty() {
                    match rows_per_path {
                        None => rows_per_path = Some(row_in_path),
                        Some(k) if k != row_in_path => {
                            return Err(Error::Format("ragged paths".into()))
                        }
                        _ => {}
                    }
                }
                ids.push(id);
                row_in_path = 0;
            }
            if ids.len() == 1 {
                times.push(num(field(1))?);
            }
            w.push(num(field(2))?);
            if !field(3).is_empty() {
                h.push(num(field(3))?);
            }
            b.push(num(field(4))?);
            qv.push(num(field(5))?);
            row_in_path += 1;
        }
        if ids.is_empty() {
            return Err(Error::Format("empty bundle".into()));
        }
        if rows_per_path.is_some_and(|k| k != row_in_path) {
            return Err(Error::Format("ragged paths".into()));
        }
        let n_steps = times.len() - 1;
        let grid = TimeGrid::new(*times.last().unwrap_or(&0.0), n_steps)?;
        if times.iter().enumerate().any(|(i, &t)| t != grid.time(i)) {
            return Err(Error::Format("times are not a uniform grid".into()));
        }
        let n_paths = ids.len();
        if ids
            .iter()
            .enumerate()
            .any(|(k, &id)| id != ids[0] + k as u64)
            || h.len() != n_paths * n_steps
        {
            return Err(Error::Format(
                "path ids or control columns are inconsistent".into(),
            ));
        }
        Ok(Self {
            grid,
            n_paths,
            first_path: ids[0],
            seed,
            control: control.to_string(),
            w,
            h,
            b,
            qv,
        })
    }

    /// Compact little-endian binary layout with a versioned header.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(BINARY_MAGIC)?;
        out.write_u32::<LittleEndian>(BINARY_VERSION)?;
        out.write_f64::<LittleEndian>(self.grid.horizon())?;
        out.write_u64::<LittleEndian>(self.grid.n_steps() as u64)?;
        out.write_u64::<LittleEndian>(self.n_paths as u64)?;
        out.write_u64::<LittleEndian>(self.first_path)?;
        out.write_u64::<LittleEndian>(self.seed)?;
        out.write_u32::<LittleEndian>(self.control.len() as u32)?;
        out.write_all(self.control.as_bytes())?;
        for arr in [&self.w, &self.h, &self.b, &self.qv] {
            for &x in arr.iter() {
                out.write_f64::<LittleEndian>(x)?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::Format("not a path bundle".into()));
        }
        let version = input.read_u32::<LittleEndian>()?;
        if version != BINARY_VERSION {
            return Err(Error::Format(format!(
                "unsupported bundle version {version}"
            )));
        }
        let horizon = input.read_f64::<LittleEndian>()?;
        let n_steps = input.read_u64::<LittleEndian>()? as usize;
        let n_paths = input.read_u64::<LittleEndian>()? as usize;
        let first_path = input.read_u64::<LittleEndian>()?;
        let seed = input.read_u64::<LittleEndian>()?;
        let len = input.read_u32::<LittleEndian>()? as usize;
        let mut control = vec![0u8; len];
        input.read_exact(&mut control)?;
        let control = String::from_utf8(control)
            .map_err(|_| Error::Format("control label is not utf-8".into()))?;
        let grid = TimeGrid::new(horizon, n_steps)?;
        let mut read_vec = |len: usize| -> Result<Vec<f64>> {
            let mut v = vec![0.0; len];
            input.read_f64_into::<LittleEndian>(&mut v)?;
            Ok(v)
        };
        let w = read_vec(n_paths * (n_steps + 1))?;
        let h = read_vec(n_paths * n_steps)?;
        let b = read_vec(n_paths * (n_steps + 1))?;
        let qv = read_vec(n_paths * (n_steps + 1))?;
        Ok(Self {
            grid,
            n_paths,
            first_path,
            seed,
            control,
            w,
            h,
            b,
            qv,
        })
    }
}

fn num(s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::Format(format!("not a number: `{s}`")))
}

/// Simulates `n_paths` paths `B_{i+1} = B_i + h_i (W_{i+1} - W_i)`,
/// `<B>_{i+1} = <B>_i + h_i^2 dt`, with `h_i` chosen before the step's increment.
pub fn simulate_bundle(
    spec: &GSpec,
    control: &VolControl,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<PathBundle> {
    simulate_range(spec, control, grid, seed, 0, n_paths)
}

/// Simulates global paths `first_path .. first_path + n_paths` of `seed`.
pub fn simulate_range(
    spec: &GSpec,
    control: &VolControl,
    grid: &TimeGrid,
    seed: u64,
    first_path: u64,
    n_paths: usize,
) -> Result<PathBundle> {
    if n_paths == 0 {
        return Err(Error::InvalidArgument("bundle needs n_paths >= 1".into()));
    }
    control.validate(spec, grid)?;
    let n = grid.n_steps();
    let dt = grid.dt();
    let sqrt_dt = dt.sqrt();
    let mut w = vec![0.0; n_paths * (n + 1)];
    let mut h = vec![0.0; n_paths * n];
    let mut b = vec![0.0; n_paths * (n + 1)];
    let mut qv = vec![0.0; n_paths * (n + 1)];

    w.par_chunks_mut(n + 1)
        .zip(h.par_chunks_mut(n))
        .zip(b.par_chunks_mut(n + 1))
        .zip(qv.par_chunks_mut(n + 1))
        .enumerate()
        .try_for_each(|(p, (((w, h), b), qv))| -> Result<()> {
            let path = first_path + p as u64;
            let mut noise = path_rng(seed, path, PURPOSE_NOISE);
            let mut sampler = control.sampler(spec, grid, seed, path);
            for i in 0..n {
                let sigma = sampler.next(i, b[i]);
                spec.check_sigma(sigma)?;
                let z: f64 = noise.sample(StandardNormal);
                let dw = sqrt_dt * z;
                w[i + 1] = w[i] + dw;
                h[i] = sigma;
                b[i + 1] = b[i] + sigma * dw;
                qv[i + 1] = qv[i] + sigma * sigma * dt;
            }
            Ok(())
        })?;

    Ok(PathBundle {
        grid: *grid,
        n_paths,
        first_path,
        seed,
        control: control.label(),
        w,
        h,
        b,
        qv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::FnPolicy;

    fn spec() -> GSpec {
        GSpec::new(1.0, 2.0).unwrap()
    }

    #[test]
    fn starts_at_zero_and_respects_band() {
        let g = TimeGrid::new(1.0, 50).unwrap();
        let c = VolControl::RandomAdapted {
            seed: 3,
            switch_prob: 0.3,
        };
        let bundle = simulate_bundle(&spec(), &c, &g, 200, 11).unwrap();
        for p in 0..bundle.n_paths() {
            assert_eq!(bundle.b(p)[0], 0.0);
            assert_eq!(bundle.qv(p)[0], 0.0);
            assert_eq!(bundle.w(p)[0], 0.0);
        }
        assert_eq!(bundle.band_violations(&spec(), 1e-15), 0);
    }

    #[test]
    fn constant_control_qv_telescopes() {
        let g = TimeGrid::new(1.5, 64).unwrap();
        let s = 1.2;
        let bundle = simulate_bundle(&spec(), &VolControl::Constant(s), &g, 20, 1).unwrap();
        for qv in bundle.terminal_qv() {
            assert!((qv - s * s * 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn alternating_blocks_average_variance() {
        let g = TimeGrid::new(2.0, 80).unwrap();
        for n in [1, 2, 4, 8] {
            let bundle =
                simulate_bundle(&spec(), &VolControl::AlternatingBlocks { n }, &g, 5, 2).unwrap();
            for qv in bundle.terminal_qv() {
                assert!((qv - 1.5 * 2.0).abs() < 1e-12);
            }
            assert_eq!(bundle.h(0)[0], 1.0);
            assert_eq!(bundle.h(0)[79], 2f64.sqrt());
        }
    }

    #[test]
    fn rejects_empty_and_out_of_band() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        assert!(simulate_bundle(&spec(), &VolControl::Constant(1.0), &g, 0, 1).is_err());
        let bad = VolControl::feedback(FnPolicy::new("bad", |_, _| 3.0));
        assert!(matches!(
            simulate_bundle(&spec(), &bad, &g, 4, 1),
            Err(Error::ControlOutOfBand { .. })
        ));
    }

    #[test]
    fn chunks_concatenate() {
        let g = TimeGrid::new(1.0, 16).unwrap();
        let c = VolControl::RandomAdapted {
            seed: 9,
            switch_prob: 0.5,
        };
        let whole = simulate_bundle(&spec(), &c, &g, 10, 5).unwrap();
        let tail = simulate_range(&spec(), &c, &g, 5, 6, 4).unwrap();
        for p in 0..4 {
            assert_eq!(whole.b(6 + p), tail.b(p));
            assert_eq!(whole.h(6 + p), tail.h(p));
        }
    }

    #[test]
    fn csv_and_binary_round_trip() {
        let g = TimeGrid::new(1.0, 8).unwrap();
        let c = VolControl::RandomAdapted {
            seed: 1,
            switch_prob: 0.5,
        };
        let bundle = simulate_bundle(&spec(), &c, &g, 3, 42).unwrap();
        let mut csv = Vec::new();
        bundle.write_csv(&mut csv).unwrap();
        let back = PathBundle::read_csv(csv.as_slice(), 42, &c.label()).unwrap();
        assert_eq!(back, bundle);
        let mut bin = Vec::new();
        bundle.write_binary(&mut bin).unwrap();
        assert_eq!(PathBundle::read_binary(bin.as_slice()).unwrap(), bundle);
        assert!(PathBundle::read_binary(&b"nope"[..]).is_err());
    }
}
