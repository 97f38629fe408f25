//! SNR measurement and multi-point sweeps.
//!
//! SNR of a fabric: a full `n x m` tile with every weight at +1 and every
//! row at `vdd`. The signal is the mean over column pairs of
//! `(I+ - I-) r_sense`; noise is the configured input-referred sigma, so the
//! ratio is analytic given the solved signal. A noiseless fabric has
//! `snr = +inf`, written as `inf` in CSV output.

use std::fmt;

use crate::circuit::exact::ExactSum;
use crate::circuit::{ideal_mvm, solve_dc_with, CellMatrix, PairMatrix};
use crate::circuit::build_network;
use crate::error::{Error, Result};
use crate::io::Dataset;
use crate::model::BinarizedModel;
use crate::pipeline::{deploy, evaluate, EvaluationReport};
use crate::tech::{BitcellType, FabricConfig, TechnologyProfile, Weight};

#[derive(Debug, Clone, PartialEq)]
pub struct SnrResult {
    pub rows: usize,
    pub cols: usize,
    pub technology: String,
    pub bitcell: BitcellType,
    pub parasitics: bool,
    /// Mean differential voltage at the neuron inputs (V).
    pub signal: f64,
    pub noise_rms: f64,
    pub snr: f64,
    /// Set by [`normalize_snr`].
    pub normalized_snr: Option<f64>,
}

pub fn measure_snr(fabric: &FabricConfig) -> Result<SnrResult> {
    fabric.validate()?;
    let tech = &fabric.technology;
    let pairs = fabric.cols / 2;
    let pair = fabric.pair_of(Weight::Plus);
    let matrix = PairMatrix::from_fn(fabric.rows, pairs, |_, _| pair);
    let inputs = vec![tech.vdd; fabric.rows];
    let diffs: Vec<f64> = if fabric.parasitics_enabled {
        let system = build_network(&CellMatrix::from_pairs(&matrix), fabric, &inputs)?;
        let sol = solve_dc_with(&system, &fabric.solver)?;
        (0..pairs)
            .map(|o| sol.foot_currents[2 * o] - sol.foot_currents[2 * o + 1])
            .collect()
    } else {
        ideal_mvm(&matrix, &inputs)?.iter().map(|c| c.i_diff).collect()
    };
    let mean: ExactSum = diffs.iter().map(|d| d * tech.r_sense).collect();
    let signal = mean.value() / pairs as f64;
    let snr = if tech.sigma_noise == 0.0 {
        f64::INFINITY
    } else {
        signal / tech.sigma_noise
    };
    Ok(SnrResult {
        rows: fabric.rows,
        cols: fabric.cols,
        technology: tech.name.clone(),
        bitcell: fabric.bitcell,
        parasitics: fabric.parasitics_enabled,
        signal,
        noise_rms: tech.sigma_noise,
        snr,
        normalized_snr: None,
    })
}

/// Divides every SNR by the baseline's.
pub fn normalize_snr(results: &[SnrResult], baseline: &SnrResult) -> Result<Vec<SnrResult>> {
    if baseline.snr.is_nan() || baseline.snr <= 0.0 || baseline.snr.is_infinite() {
        return Err(Error::ZeroBaseline(baseline.snr));
    }
    Ok(results
        .iter()
        .map(|r| SnrResult {
            normalized_snr: Some(r.snr / baseline.snr),
            ..r.clone()
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// One baseline for the whole sweep: the first technology and bitcell of
    /// the sweep at the baseline size without parasitics.
    #[default]
    Global,
    /// Each (technology, bitcell) against its own baseline-size,
    /// parasitic-free SNR.
    PerTechnology,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// Subarray shapes `(rows, cols)`.
    pub sizes: Vec<(usize, usize)>,
    pub technologies: Vec<TechnologyProfile>,
    pub bitcells: Vec<BitcellType>,
    pub parasitics: bool,
    /// Images per point; 0 skips inference.
    pub images: usize,
    pub seed: u64,
    pub normalization: Normalization,
    pub baseline_size: (usize, usize),
    /// Template for solver settings and source resistance.
    pub fabric_template: Option<FabricConfig>,
    pub jobs: usize,
}

impl SweepSpec {
    pub fn new(sizes: Vec<(usize, usize)>, technologies: Vec<TechnologyProfile>, bitcells: Vec<BitcellType>) -> Self {
        Self {
            sizes,
            technologies,
            bitcells,
            parasitics: true,
            images: 0,
            seed: 0,
            normalization: Normalization::Global,
            baseline_size: (32, 32),
            fabric_template: None,
            jobs: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.technologies.is_empty() || self.bitcells.is_empty() {
            return Err(Error::InvalidInput("sweep axes must be non-empty".into()));
        }
        Ok(())
    }

    fn fabric(&self, size: (usize, usize), tech: &TechnologyProfile, bitcell: BitcellType, parasitics: bool) -> Result<FabricConfig> {
        let mut f = FabricConfig::new(size.0, size.1, tech.clone(), bitcell, parasitics)?;
        if let Some(t) = &self.fabric_template {
            f.r_source = t.r_source;
            f.solver = t.solver;
        }
        Ok(f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub size: (usize, usize),
    pub technology: String,
    pub bitcell: BitcellType,
    pub parasitics: bool,
    pub outcome: std::result::Result<SweepPoint, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub report: Option<EvaluationReport>,
    pub snr: SnrResult,
}

pub const SWEEP_CSV_HEADER: [&str; 13] = [
    "size", "tech", "bitcell", "parasitics", "accuracy", "p_total", "p_xbar", "p_neuron", "p_demux", "p_switch",
    "signal_v", "snr", "snr_norm",
];

fn fmt_ratio(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.6}")
    }
}

impl SweepRow {
    pub fn csv_record(&self) -> Vec<String> {
        let mut rec = vec![
            format!("{}x{}", self.size.0, self.size.1),
            self.technology.clone(),
            self.bitcell.to_string(),
            self.parasitics.to_string(),
        ];
        match &self.outcome {
            Err(_) => {
                rec.push("error".into());
                rec.extend(vec![String::new(); 8]);
            }
            Ok(point) => {
                match &point.report {
                    Some(r) => {
                        let p = &r.power;
                        rec.push(format!("{:.6}", r.accuracy));
                        for v in [p.total(), p.crossbar, p.neurons, p.demux, p.switches] {
                            rec.push(format!("{v:.9e}"));
                        }
                    }
                    None => rec.extend(vec![String::new(); 6]),
                }
                rec.push(format!("{:.9e}", point.snr.signal));
                rec.push(fmt_ratio(point.snr.snr));
                rec.push(point.snr.normalized_snr.map(fmt_ratio).unwrap_or_default());
            }
        }
        rec
    }
}

impl fmt::Display for SnrResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}x{} {} {} parasitics={}: signal {:.6} mV, noise {:.4} mV, snr {}",
            self.rows,
            self.cols,
            self.technology,
            self.bitcell,
            self.parasitics,
            1e3 * self.signal,
            1e3 * self.noise_rms,
            fmt_ratio(self.snr)
        )?;
        if let Some(n) = self.normalized_snr {
            write!(f, " (normalized {})", fmt_ratio(n))?;
        }
        Ok(())
    }
}

/// One row per (size, technology, bitcell) in sweep order. A point that
/// fails is recorded as an error row; the sweep carries on.
pub fn run_sweep(spec: &SweepSpec, model: Option<&BinarizedModel>, dataset: Option<&Dataset>) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    if spec.images > 0 && (model.is_none() || dataset.is_none()) {
        return Err(Error::InvalidInput("inference points need a model and a dataset".into()));
    }
    let baseline_for = |tech: &TechnologyProfile, bitcell: BitcellType| -> Result<SnrResult> {
        measure_snr(&spec.fabric(spec.baseline_size, tech, bitcell, false)?)
    };
    let global = match spec.normalization {
        Normalization::Global => Some(baseline_for(&spec.technologies[0], spec.bitcells[0])),
        Normalization::PerTechnology => None,
    };

    let mut rows = Vec::new();
    for &size in &spec.sizes {
        for tech in &spec.technologies {
            for &bitcell in &spec.bitcells {
                let point = || -> Result<SweepPoint> {
                    let fabric = spec.fabric(size, tech, bitcell, spec.parasitics)?;
                    let snr = measure_snr(&fabric)?;
                    let baseline = match &global {
                        Some(Ok(b)) => b.clone(),
                        Some(Err(e)) => return Err(Error::InvalidInput(format!("baseline: {e}"))),
                        None => baseline_for(tech, bitcell)?,
                    };
                    let snr = normalize_snr(&[snr], &baseline)?.remove(0);
                    let report = match (model, dataset) {
                        (Some(m), Some(d)) if spec.images > 0 => {
                            let net = deploy(m, &fabric)?;
                            Some(evaluate(&net, m, d, spec.images, spec.seed, spec.jobs)?)
                        }
                        _ => None,
                    };
                    Ok(SweepPoint { report, snr })
                };
                rows.push(SweepRow {
                    size,
                    technology: tech.name.clone(),
                    bitcell,
                    parasitics: spec.parasitics,
                    outcome: point().map_err(|e| e.to_string()),
                });
            }
        }
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_CSV_HEADER)?;
    for r in rows {
        w.write_record(r.csv_record())?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuron::NoiseStream;

    fn fabric(n: usize, tech: TechnologyProfile, parasitics: bool) -> FabricConfig {
        FabricConfig::new(n, n, tech, BitcellType::ZeroT1R, parasitics).unwrap()
    }

    #[test]
    fn closed_form_ideal_signal() {
        let r = measure_snr(&fabric(32, TechnologyProfile::mram(), false)).unwrap();
        let expected = 32.0 * 0.8 * (1.0 / 3e3 - 1.0 / 9e3) * 10.0;
        assert!((r.signal - expected).abs() < 1e-15);
        assert!((r.signal - 56.89e-3).abs() < 0.01e-3);
        assert!((r.snr - 113.78).abs() < 0.01);
    }

    #[test]
    fn parasitics_attenuate() {
        let ideal = measure_snr(&fabric(32, TechnologyProfile::mram(), false)).unwrap();
        let real = measure_snr(&fabric(32, TechnologyProfile::mram(), true)).unwrap();
        assert!(real.signal < ideal.signal);
        assert!(real.signal > 0.0);
    }

    #[test]
    fn noiseless_snr_is_infinite() {
        let mut tech = TechnologyProfile::mram();
        tech.sigma_noise = 0.0;
        let r = measure_snr(&fabric(8, tech, false)).unwrap();
        assert_eq!(r.snr, f64::INFINITY);
        assert_eq!(fmt_ratio(r.snr), "inf");
        assert!(matches!(normalize_snr(&[], &r), Err(Error::ZeroBaseline(_))));
    }

    #[test]
    fn normalization() {
        let base = measure_snr(&fabric(32, TechnologyProfile::mram(), false)).unwrap();
        let mut half = base.clone();
        half.snr /= 2.0;
        let n = normalize_snr(&[base.clone(), half], &base).unwrap();
        assert_eq!(n[0].normalized_snr, Some(1.0));
        assert_eq!(n[1].normalized_snr, Some(0.5));
        let mut zero = base.clone();
        zero.snr = 0.0;
        assert!(normalize_snr(&[base], &zero).is_err());
    }

    #[test]
    fn cbram_beats_mram() {
        for parasitics in [false, true] {
            let m = measure_snr(&fabric(32, TechnologyProfile::mram(), parasitics)).unwrap();
            let c = measure_snr(&fabric(32, TechnologyProfile::cbram(), parasitics)).unwrap();
            assert!(c.snr > m.snr);
        }
    }

    /// Monte-Carlo estimate of the noise RMS agrees with the configured sigma.
    #[test]
    fn sampled_noise_matches_sigma() {
        let sigma = 0.5e-3;
        let mut s = NoiseStream::new(123);
        let n = 200_000;
        let sq: f64 = (0..n).map(|_| (sigma * s.next_gaussian()).powi(2)).sum();
        let rms = (sq / n as f64).sqrt();
        assert!((rms - sigma).abs() < 0.01 * sigma);
    }

    #[test]
    fn sweep_shape_without_images() {
        let spec = SweepSpec::new(
            vec![(32, 32), (64, 64)],
            vec![TechnologyProfile::mram(), TechnologyProfile::cbram()],
            vec![BitcellType::ZeroT1R, BitcellType::OneT1R],
        );
        let rows = run_sweep(&spec, None, None).unwrap();
        assert_eq!(rows.len(), 8);
        let csv = sweep_csv(&rows).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 9);
        assert_eq!(lines[0], SWEEP_CSV_HEADER.join(","));
        assert!(lines[1].starts_with("32x32,MRAM,0T1R,true,,,,,,,"));
        assert_eq!(csv, sweep_csv(&run_sweep(&spec, None, None).unwrap()).unwrap());

        let mut empty = spec.clone();
        empty.sizes.clear();
        assert!(run_sweep(&empty, None, None).is_err());
    }

    #[test]
    fn baseline_row_is_one() {
        let mut spec = SweepSpec::new(vec![(32, 32)], vec![TechnologyProfile::mram()], vec![BitcellType::ZeroT1R]);
        spec.parasitics = false;
        let rows = run_sweep(&spec, None, None).unwrap();
        let point = rows[0].outcome.as_ref().unwrap();
        assert_eq!(point.snr.normalized_snr, Some(1.0));
    }

    #[test]
    fn failing_point_becomes_error_row() {
        let mut spec = SweepSpec::new(vec![(16, 16), (8, 8)], vec![TechnologyProfile::mram()], vec![BitcellType::OneT1R]);
        let mut template = fabric(8, TechnologyProfile::mram(), true);
        template.solver.max_iter = Some(1);
        template.solver.tolerance = 1e-16;
        spec.fabric_template = Some(template);
        spec.baseline_size = (8, 8);
        let rows = run_sweep(&spec, None, None).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.outcome.is_err()));
        assert_eq!(rows[0].csv_record()[4], "error");
    }
}
