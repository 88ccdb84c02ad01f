//! Versioned JSON analysis report.
//!
//! A report is self-contained: it embeds the original system-definition
//! text and every eigenfunction's coefficients, so `emit-grid` and
//! `verify` can rebuild the analysis objects without re-running the
//! solves. The layout is plain `serde` structs — field order is fixed by
//! declaration and maps are sorted, so serializing the same analysis
//! twice produces byte-identical JSON (the `timing_seconds` block is the
//! one run-dependent field).
//!
//! `certified` at the top level requires every eigenfunction's residual
//! certificate *and* the verification summaries to pass; a basin estimate
//! carries its own certificate flag and is reported separately.

use std::collections::BTreeMap;

use koopman::bernstein_fp::BernsteinEigenfunction;
use koopman::cycle::LimitCycleParam;
use koopman::limit_cycle::FourierBernsteinEigenfunction;
use koopman::stability::Eigenfunction;
use koopman::system::BoxMap;
use koopman::taylor::TaylorEigenfunction;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::commands::CliError;

/// Current report schema version.
pub const SCHEMA_VERSION: u32 = 1;

/// A complex number in report form.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Cx {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for Cx {
    fn from(z: Complex64) -> Self {
        Cx { re: z.re, im: z.im }
    }
}

impl From<Cx> for Complex64 {
    fn from(z: Cx) -> Self {
        Complex64::new(z.re, z.im)
    }
}

fn to_cx(zs: &[Complex64]) -> Vec<Cx> {
    zs.iter().map(|&z| z.into()).collect()
}

fn from_cx(zs: &[Cx]) -> Vec<Complex64> {
    zs.iter().map(|&z| z.into()).collect()
}

/// The system as analyzed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SystemBlock {
    /// State dimension.
    pub dim: usize,
    /// `"cartesian"` or `"polar"`.
    pub coords: String,
    /// The definition file, verbatim.
    pub source: String,
}

/// Jacobian spectrum at the fixed point (fixed-point analyses only).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumBlock {
    pub fixed_point: Vec<f64>,
    pub eigenvalues: Vec<Cx>,
    pub left_eigenvectors: Vec<Vec<Cx>>,
    pub nonresonant: bool,
}

/// Located periodic orbit (limit-cycle analyses only).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CycleBlock {
    pub period: f64,
    pub orientation: f64,
    pub e_r_norm: f64,
    pub delta: f64,
    pub floquet_exponent: Cx,
    /// Deviation of the trivial Floquet multiplier from 1.
    pub trivial_deviation: f64,
    /// Uniform-in-angle radius samples; enough to rebuild the chart.
    pub radius_samples: Vec<f64>,
}

/// Box chart for Bernstein eigenfunctions.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChartBlock {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Eigenfunction coefficients, in the layout named by `layout`:
/// `"monomial"` pairs `exponents[i]` with `values[i]`;
/// `"tensor-bernstein"` stores the full coefficient tensor with the last
/// axis fastest; `"fourier-bernstein"` stores harmonic-major rows of
/// radial coefficients for harmonics −n̄..n̄.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoeffBlock {
    pub layout: String,
    pub exponents: Option<Vec<Vec<u32>>>,
    pub values: Vec<Cx>,
}

/// One computed eigenfunction with everything needed to re-evaluate it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EfBlock {
    pub index: usize,
    /// `"taylor"`, `"bernstein"`, or `"fourier-bernstein"`.
    pub method: String,
    pub eigenvalue: Cx,
    pub order: Option<u32>,
    pub degree: Option<usize>,
    pub n_bar: Option<usize>,
    pub harmonic_stride: Option<usize>,
    pub field_degree: Option<usize>,
    /// Relative least-squares residual; absent for Taylor expansions,
    /// which carry no residual certificate.
    pub residual: Option<f64>,
    pub certified: bool,
    /// Estimated radius of convergence (Taylor, order ≥ 20 only).
    pub analyticity_radius: Option<f64>,
    /// Set when this entry is the complex conjugate of an earlier one.
    pub conjugate_of: Option<usize>,
    pub center: Option<Vec<f64>>,
    pub chart: Option<ChartBlock>,
    pub gradient_seed: Option<Vec<Cx>>,
    pub fixed_point_box: Option<Vec<f64>>,
    pub c2: Option<Vec<Cx>>,
    pub coefficients: CoeffBlock,
}

/// Lyapunov candidate built from the eigenfunctions.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LyapunovBlock {
    pub p: u32,
    pub dominant_rate: f64,
    /// Indices into `eigenfunctions` of the members.
    pub members: Vec<usize>,
}

/// Certified sublevel-set estimate of the basin of attraction.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BasinBlock {
    pub level: f64,
    pub decrease_margin: f64,
    pub certified: bool,
    pub lattice_lo: Vec<f64>,
    pub lattice_hi: Vec<f64>,
    pub resolution: Vec<usize>,
    pub inside_count: usize,
    pub total_points: usize,
}

/// Per-eigenfunction semigroup-identity check.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SemigroupBlock {
    pub index: usize,
    pub max_rel_error: f64,
    pub skipped: usize,
    pub checked: usize,
}

/// Fresh-grid defect check for limit-cycle solutions.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FreshGridBlock {
    pub max_abs_residual: f64,
    pub phi_scale: f64,
    /// Allowed defect: `factor × residual × phi_scale`.
    pub bound: f64,
    pub pass: bool,
}

/// All verification summaries from the run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerificationBlock {
    pub samples: usize,
    pub horizon: f64,
    pub semigroup: Vec<SemigroupBlock>,
    pub semigroup_max_error: f64,
    /// Decay-envelope check result; absent when no Lyapunov candidate
    /// was built (limit-cycle runs construct one from the single
    /// eigenfunction).
    pub envelope_pass: Option<bool>,
    pub fresh_grid: Option<FreshGridBlock>,
    pub pass: bool,
}

/// Top-level analysis report (`schema = 1`).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub command: String,
    pub seed: u64,
    pub threads: usize,
    pub system: SystemBlock,
    pub spectrum: Option<SpectrumBlock>,
    pub cycle: Option<CycleBlock>,
    pub eigenfunctions: Vec<EfBlock>,
    pub lyapunov: Option<LyapunovBlock>,
    pub basin: Option<BasinBlock>,
    pub verification: Option<VerificationBlock>,
    pub certified: bool,
    pub artifacts: Vec<String>,
    pub timing_seconds: BTreeMap<String, f64>,
}

// ---------------------------------------------------------------------
// Serialization of computed eigenfunctions
// ---------------------------------------------------------------------

/// Report block for a Taylor expansion.
pub fn taylor_block(
    index: usize,
    ef: &TaylorEigenfunction,
    analyticity_radius: Option<f64>,
    conjugate_of: Option<usize>,
) -> EfBlock {
    let mut exponents = Vec::new();
    let mut values = Vec::new();
    for (k, c) in ef.coeffs() {
        exponents.push(k.0.clone());
        values.push((*c).into());
    }
    EfBlock {
        index,
        method: "taylor".to_string(),
        eigenvalue: ef.eigenvalue().into(),
        order: Some(ef.max_order()),
        degree: None,
        n_bar: None,
        harmonic_stride: None,
        field_degree: None,
        residual: None,
        certified: false,
        analyticity_radius,
        conjugate_of,
        center: Some(ef.center().to_vec()),
        chart: None,
        gradient_seed: Some(to_cx(ef.gradient_seed())),
        fixed_point_box: None,
        c2: None,
        coefficients: CoeffBlock {
            layout: "monomial".to_string(),
            exponents: Some(exponents),
            values,
        },
    }
}

/// Report block for a Bernstein least-squares solution.
pub fn bernstein_block(index: usize, ef: &BernsteinEigenfunction, conjugate_of: Option<usize>) -> EfBlock {
    EfBlock {
        index,
        method: "bernstein".to_string(),
        eigenvalue: ef.eigenvalue().into(),
        order: None,
        degree: Some(ef.degree()),
        n_bar: None,
        harmonic_stride: None,
        field_degree: None,
        residual: Some(ef.lsq_residual()),
        certified: ef.certified(),
        analyticity_radius: None,
        conjugate_of,
        center: None,
        chart: Some(ChartBlock {
            lo: ef.chart().lo.clone(),
            hi: ef.chart().hi.clone(),
        }),
        gradient_seed: Some(to_cx(ef.seed())),
        fixed_point_box: Some(ef.fixed_point_box().to_vec()),
        c2: None,
        coefficients: CoeffBlock {
            layout: "tensor-bernstein".to_string(),
            exponents: None,
            values: to_cx(&ef.coeffs().coeffs),
        },
    }
}

/// Report block for a Fourier–Bernstein limit-cycle solution.
pub fn lc_block(index: usize, ef: &FourierBernsteinEigenfunction, field_degree: usize) -> EfBlock {
    EfBlock {
        index,
        method: "fourier-bernstein".to_string(),
        eigenvalue: ef.eigenvalue().into(),
        order: None,
        degree: Some(ef.degree()),
        n_bar: Some(ef.n_bar()),
        harmonic_stride: Some(ef.harmonic_stride()),
        field_degree: Some(field_degree),
        residual: Some(ef.lsq_residual()),
        certified: ef.certified(),
        analyticity_radius: None,
        conjugate_of: None,
        center: None,
        chart: None,
        gradient_seed: None,
        fixed_point_box: None,
        c2: Some(to_cx(ef.c2())),
        coefficients: CoeffBlock {
            layout: "fourier-bernstein".to_string(),
            exponents: None,
            values: to_cx(ef.coeffs()),
        },
    }
}

/// Cycle block from a located chart plus the trivial-multiplier deviation.
pub fn cycle_block(lc: &LimitCycleParam, trivial_deviation: f64) -> Result<CycleBlock, CliError> {
    let lambda = lc.floquet_exponent().ok_or_else(|| CliError::Config {
        stage: "report",
        msg: "limit cycle has no Floquet exponent".to_string(),
    })?;
    Ok(CycleBlock {
        period: lc.period(),
        orientation: lc.orientation(),
        e_r_norm: lc.e_r_norm(),
        delta: lc.delta(),
        floquet_exponent: lambda.into(),
        trivial_deviation,
        radius_samples: lc.radius_samples().to_vec(),
    })
}

// ---------------------------------------------------------------------
// Rebuilding analysis objects from a report
// ---------------------------------------------------------------------

/// An eigenfunction reconstructed from a report block.
#[derive(Clone, Debug)]
pub enum RebuiltEf {
    Taylor(TaylorEigenfunction),
    Bernstein(BernsteinEigenfunction),
    Lc(FourierBernsteinEigenfunction),
}

impl RebuiltEf {
    /// Borrow as the evaluation trait object.
    pub fn as_dyn(&self) -> &dyn Eigenfunction {
        match self {
            RebuiltEf::Taylor(ef) => ef,
            RebuiltEf::Bernstein(ef) => ef,
            RebuiltEf::Lc(ef) => ef,
        }
    }

    /// Owned trait object (for Lyapunov membership).
    pub fn boxed(&self) -> Box<dyn Eigenfunction> {
        match self {
            RebuiltEf::Taylor(ef) => Box::new(ef.clone()),
            RebuiltEf::Bernstein(ef) => Box::new(ef.clone()),
            RebuiltEf::Lc(ef) => Box::new(ef.clone()),
        }
    }

    /// The eigenvalue.
    pub fn eigenvalue(&self) -> Complex64 {
        self.as_dyn().eigenvalue()
    }
}

fn missing(field: &'static str) -> CliError {
    CliError::Config {
        stage: "rebuild",
        msg: format!("report eigenfunction is missing `{field}`"),
    }
}

/// Rebuild the chart of a limit-cycle report.
pub fn rebuild_cycle(cycle: &CycleBlock) -> Result<LimitCycleParam, CliError> {
    let mut lc = LimitCycleParam::from_samples(
        cycle.period,
        cycle.orientation,
        cycle.radius_samples.clone(),
        cycle.e_r_norm,
        cycle.delta,
    )
    .map_err(|e| CliError::Stage {
        stage: "rebuild",
        source: e,
    })?;
    lc.set_floquet_exponent(cycle.floquet_exponent.into());
    Ok(lc)
}

/// Rebuild one eigenfunction from its report block. Limit-cycle blocks
/// need the report's cycle block for the chart.
pub fn rebuild_eigenfunction(
    block: &EfBlock,
    cycle: Option<&CycleBlock>,
) -> Result<RebuiltEf, CliError> {
    let stage = |e: koopman::Error| CliError::Stage {
        stage: "rebuild",
        source: e,
    };
    match block.method.as_str() {
        "taylor" => {
            let center = block.center.clone().ok_or_else(|| missing("center"))?;
            let seed = from_cx(block.gradient_seed.as_ref().ok_or_else(|| missing("gradient_seed"))?);
            let exps = block
                .coefficients
                .exponents
                .as_ref()
                .ok_or_else(|| missing("coefficients.exponents"))?;
            let terms: Vec<(Vec<u32>, Complex64)> = exps
                .iter()
                .cloned()
                .zip(block.coefficients.values.iter().map(|&v| v.into()))
                .collect();
            let ef = TaylorEigenfunction::from_parts(
                center,
                block.eigenvalue.into(),
                block.order.ok_or_else(|| missing("order"))?,
                &terms,
                seed,
            )
            .map_err(stage)?;
            Ok(RebuiltEf::Taylor(ef))
        }
        "bernstein" => {
            let chart = block.chart.as_ref().ok_or_else(|| missing("chart"))?;
            let chart = BoxMap::new(chart.lo.clone(), chart.hi.clone()).map_err(stage)?;
            let ef = BernsteinEigenfunction::from_parts(
                chart,
                block.degree.ok_or_else(|| missing("degree"))?,
                block.eigenvalue.into(),
                from_cx(&block.coefficients.values),
                block.residual.ok_or_else(|| missing("residual"))?,
                block
                    .fixed_point_box
                    .clone()
                    .ok_or_else(|| missing("fixed_point_box"))?,
                block.certified,
                from_cx(block.gradient_seed.as_ref().ok_or_else(|| missing("gradient_seed"))?),
            )
            .map_err(stage)?;
            Ok(RebuiltEf::Bernstein(ef))
        }
        "fourier-bernstein" => {
            let cycle = cycle.ok_or_else(|| CliError::Config {
                stage: "rebuild",
                msg: "limit-cycle eigenfunction without a cycle block".to_string(),
            })?;
            let lc = rebuild_cycle(cycle)?;
            let ef = FourierBernsteinEigenfunction::from_parts(
                lc,
                block.n_bar.ok_or_else(|| missing("n_bar"))?,
                block.degree.ok_or_else(|| missing("degree"))?,
                block.eigenvalue.into(),
                from_cx(&block.coefficients.values),
                from_cx(block.c2.as_ref().ok_or_else(|| missing("c2"))?),
                block.residual.ok_or_else(|| missing("residual"))?,
                block.harmonic_stride.ok_or_else(|| missing("harmonic_stride"))?,
                block.certified,
            )
            .map_err(stage)?;
            Ok(RebuiltEf::Lc(ef))
        }
        other => Err(CliError::Config {
            stage: "rebuild",
            msg: format!("unknown eigenfunction method `{other}`"),
        }),
    }
}

/// Rebuild every eigenfunction in a report.
pub fn rebuild_all(report: &Report) -> Result<Vec<RebuiltEf>, CliError> {
    report
        .eigenfunctions
        .iter()
        .map(|b| rebuild_eigenfunction(b, report.cycle.as_ref()))
        .collect()
}

/// Serialize a report as pretty JSON with a trailing newline.
pub fn to_json(report: &Report) -> Result<Vec<u8>, CliError> {
    let mut buf = serde_json::to_vec_pretty(report).map_err(|e| CliError::Json {
        stage: "report",
        source: e,
    })?;
    buf.push(b'\n');
    Ok(buf)
}

/// Parse a report, checking the schema version.
pub fn from_json(bytes: &[u8]) -> Result<Report, CliError> {
    let report: Report = serde_json::from_slice(bytes).map_err(|e| CliError::Json {
        stage: "report-load",
        source: e,
    })?;
    if report.schema != SCHEMA_VERSION {
        return Err(CliError::Config {
            stage: "report-load",
            msg: format!(
                "unsupported report schema {} (this tool reads schema {})",
                report.schema, SCHEMA_VERSION
            ),
        });
    }
    Ok(report)
}
