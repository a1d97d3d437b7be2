//! Distributional limits under absolutely continuous initial laws.
//!
//! Orbits are started from `ν`, pushed forward `n` steps and summarized by
//! their empirical characteristic function, which is compared with the
//! infinite-volume target `φ_X(θ) = Av(e^{iθF})`. Samples are drawn in
//! blocks of [`BLOCK_SIZE`](crate::rng::BLOCK_SIZE) from independent streams
//! of the law's seed and every reduction runs in sample order.

mod law;

pub use law::{DensityFn, LawKind, SampleLaw, SamplerFn};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::maps::iterate;
use crate::observables::{characteristic_average, GlobalObservable, RealFn};
use crate::rng::{blocks, stream_rng};
use crate::table::{float, opt_float, Csv};

/// Orbits lost to the branch cut beyond this fraction of `N` flag the run.
pub const DROP_FRACTION_LIMIT: f64 = 1e-4;

/// `N` initial points drawn from `law`, in block order.
pub fn initial_samples(law: &SampleLaw, n_samples: usize) -> Vec<f64> {
    let chunks: Vec<Vec<f64>> = blocks(n_samples)
        .into_par_iter()
        .map(|(b, len)| {
            let mut rng = stream_rng(law.seed, b);
            (0..len).map(|_| law.sample(&mut rng)).collect()
        })
        .collect();
    chunks.concat()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pushforward {
    /// `Tⁿ(x)` for the surviving orbits, in sample order.
    pub samples: Vec<f64>,
    pub requested: usize,
    pub dropped: usize,
    pub flagged: bool,
}

fn drop_flag(dropped: usize, requested: usize) -> bool {
    dropped as f64 >= DROP_FRACTION_LIMIT * requested as f64 && dropped > 0
}

/// Samples of `Tⁿ(x)` with `x ~ ν`.
pub fn pushforward_samples(law: &SampleLaw, n: usize, n_samples: usize) -> Result<Pushforward> {
    if n_samples == 0 {
        return Err(LabError::usage("need at least one sample"));
    }
    let raw: Vec<Option<f64>> = initial_samples(law, n_samples)
        .into_par_iter()
        .map(|x| iterate(x, n))
        .collect();
    let samples: Vec<f64> = raw.iter().flatten().copied().collect();
    let dropped = n_samples - samples.len();
    Ok(Pushforward {
        samples,
        requested: n_samples,
        dropped,
        flagged: drop_flag(dropped, n_samples),
    })
}

/// `𝒜ₖF(x) = (1/k) Σ_{j<k} F(Tʲx)`.
pub fn birkhoff_average(f: &GlobalObservable, x: f64, k: usize) -> Result<f64> {
    let f = f.real_fn()?;
    if k == 0 {
        return Err(LabError::usage("Birkhoff window k must be at least 1"));
    }
    birkhoff_from(f, x, k).ok_or_else(|| LabError::domain(format!("orbit of {x} hits the branch cut within {k} steps")))
}

fn birkhoff_from(f: &RealFn, x: f64, k: usize) -> Option<f64> {
    let mut cur = x;
    let mut acc = f(cur);
    for _ in 1..k {
        if cur == 0.0 {
            return None;
        }
        cur -= 1.0 / cur;
        acc += f(cur);
    }
    Some(acc / k as f64)
}

/// Kolmogorov-Smirnov distance `sup |F_N - F|`.
pub fn ks_statistic(samples: &[f64], cdf: &dyn Fn(f64) -> f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(LabError::usage("KS statistic needs a nonempty sample"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let c = cdf(x);
        d = d.max((i + 1) as f64 / n - c).max(c - i as f64 / n);
    }
    Ok(d)
}

/// 41 equispaced points on `[-20, 20]`.
pub fn default_theta_grid() -> Vec<f64> {
    (0..41).map(|i| -20.0 + i as f64).collect()
}

#[derive(Clone)]
pub struct DistOptions {
    pub theta_grid: Vec<f64>,
    /// Tolerance for the target `Av(e^{iθF})`.
    pub av_tol: f64,
    /// CDF for the KS statistic of the observed values.
    pub ks_target: Option<RealFn>,
}

impl Default for DistOptions {
    fn default() -> Self {
        DistOptions {
            theta_grid: default_theta_grid(),
            av_tol: 1e-6,
            ks_target: None,
        }
    }
}

impl DistOptions {
    pub fn with_ks_target(mut self, cdf: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.ks_target = Some(std::sync::Arc::new(cdf));
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfPoint {
    pub theta: f64,
    pub empirical: Complex64,
    pub target: Option<Complex64>,
}

impl CfPoint {
    pub fn deviation(&self) -> Option<f64> {
        self.target.map(|t| (t - self.empirical).norm())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionReport {
    pub observable: String,
    pub law: String,
    pub seed: u64,
    pub n: usize,
    /// Birkhoff window; 1 means no averaging.
    pub k: usize,
    pub samples: usize,
    pub dropped: usize,
    pub drop_flagged: bool,
    pub points: Vec<CfPoint>,
    pub sup_deviation: f64,
    pub ks: Option<f64>,
    /// Grid points whose target average did not converge.
    pub excluded_thetas: Vec<f64>,
}

impl DistributionReport {
    pub fn flagged(&self) -> bool {
        self.drop_flagged || !self.excluded_thetas.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut csv = Csv::new(&["theta", "re_empirical", "im_empirical", "re_target", "im_target", "deviation"]);
        for p in &self.points {
            csv.row(&[
                float(p.theta),
                float(p.empirical.re),
                float(p.empirical.im),
                opt_float(p.target.map(|t| t.re)),
                opt_float(p.target.map(|t| t.im)),
                opt_float(p.deviation()),
            ]);
        }
        csv.comment(&format!(
            "summary observable={} law={} seed={} n={} k={} N={} dropped={} sup_deviation={} ks={} excluded={}",
            self.observable,
            self.law,
            self.seed,
            self.n,
            self.k,
            self.samples,
            self.dropped,
            float(self.sup_deviation),
            opt_float(self.ks),
            self.excluded_thetas.len()
        ));
        csv.finish()
    }
}

/// `(1/N) Σ e^{iθvⱼ}`, summed in sample order.
pub fn empirical_cf(values: &[f64], theta: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &v in values {
        let (s, c) = (theta * v).sin_cos();
        acc += Complex64::new(c, s);
    }
    acc / values.len() as f64
}

type TargetCf = (Vec<Option<Complex64>>, Vec<f64>);

fn target_cf(f: &GlobalObservable, opts: &DistOptions) -> Result<TargetCf> {
    let targets: Vec<Result<Option<Complex64>>> = opts
        .theta_grid
        .par_iter()
        .map(|&t| {
            let est = characteristic_average(f, t, opts.av_tol)?;
            Ok(est.converged.then_some(est.value))
        })
        .collect();
    let mut out = Vec::with_capacity(targets.len());
    let mut excluded = Vec::new();
    for (t, r) in opts.theta_grid.iter().zip(targets) {
        let v = r?;
        if v.is_none() {
            excluded.push(*t);
        }
        out.push(v);
    }
    Ok((out, excluded))
}

struct Run<'a> {
    f: &'a GlobalObservable,
    law: &'a SampleLaw,
    n: usize,
    k: usize,
    samples: usize,
}

fn build_report(run: Run<'_>, values: &[Option<f64>], targets: &TargetCf, opts: &DistOptions) -> Result<DistributionReport> {
    let kept: Vec<f64> = values.iter().flatten().copied().collect();
    if kept.is_empty() {
        return Err(LabError::domain("every orbit hit the branch cut"));
    }
    let dropped = run.samples - kept.len();
    let points: Vec<CfPoint> = opts
        .theta_grid
        .par_iter()
        .zip(targets.0.par_iter())
        .map(|(&theta, &target)| CfPoint {
            theta,
            empirical: empirical_cf(&kept, theta),
            target,
        })
        .collect();
    let sup_deviation = points.iter().filter_map(CfPoint::deviation).fold(0.0, f64::max);
    let ks = match &opts.ks_target {
        Some(cdf) => Some(ks_statistic(&kept, cdf.as_ref())?),
        None => None,
    };
    Ok(DistributionReport {
        observable: run.f.name.clone(),
        law: run.law.name(),
        seed: run.law.seed,
        n: run.n,
        k: run.k,
        samples: run.samples,
        dropped,
        drop_flagged: drop_flag(dropped, run.samples),
        points,
        sup_deviation,
        ks,
        excluded_thetas: targets.1.clone(),
    })
}

fn birkhoff_values(f: &GlobalObservable, law: &SampleLaw, k: usize, n: usize, n_samples: usize) -> Result<Vec<Option<f64>>> {
    let rf = f.real_fn()?.clone();
    if k == 0 {
        return Err(LabError::usage("Birkhoff window k must be at least 1"));
    }
    if n_samples == 0 {
        return Err(LabError::usage("need at least one sample"));
    }
    Ok(initial_samples(law, n_samples)
        .into_par_iter()
        .map(|x| iterate(x, n).and_then(|y| birkhoff_from(&rf, y, k)))
        .collect())
}

/// Empirical CF of `F ∘ Tⁿ` under `ν` against `Av(e^{iθF})`.
pub fn strong_dist_limit_test(
    f: &GlobalObservable,
    law: &SampleLaw,
    n: usize,
    n_samples: usize,
    opts: &DistOptions,
) -> Result<DistributionReport> {
    birkhoff_dist_test(f, law, 1, n, n_samples, opts)
}

/// Empirical CF of `𝒜ₖF ∘ Tⁿ` under `ν` against `Av(e^{iθF})`.
pub fn birkhoff_dist_test(
    f: &GlobalObservable,
    law: &SampleLaw,
    k: usize,
    n: usize,
    n_samples: usize,
    opts: &DistOptions,
) -> Result<DistributionReport> {
    let values = birkhoff_values(f, law, k, n, n_samples)?;
    let targets = target_cf(f, opts)?;
    build_report(
        Run {
            f,
            law,
            n,
            k,
            samples: n_samples,
        },
        &values,
        &targets,
        opts,
    )
}

/// Sup deviation over a fixed `(k, n)` grid; entries are `(k, n, sup_dev)`.
pub fn birkhoff_scan(
    f: &GlobalObservable,
    law: &SampleLaw,
    ks: &[usize],
    ns: &[usize],
    n_samples: usize,
    opts: &DistOptions,
) -> Result<Vec<(usize, usize, f64)>> {
    let targets = target_cf(f, opts)?;
    let mut out = Vec::with_capacity(ks.len() * ns.len());
    for &k in ks {
        for &n in ns {
            let values = birkhoff_values(f, law, k, n, n_samples)?;
            let r = build_report(
                Run {
                    f,
                    law,
                    n,
                    k,
                    samples: n_samples,
                },
                &values,
                &targets,
                opts,
            )?;
            out.push((k, n, r.sup_deviation));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::uniform_cf;
    use crate::quadrature::integrate_line;

    fn normal(mean: f64, sd: f64, seed: u64) -> SampleLaw {
        SampleLaw::normal(mean, sd, seed).unwrap()
    }

    #[test]
    fn laws_are_normalized_and_sample_their_mean() {
        let laws = [
            normal(0.0, 1.0, 3),
            normal(2.5, 0.3, 3),
            SampleLaw::uniform(-1.0, 4.0, 3).unwrap(),
            SampleLaw::laplace(1.0, 2.0, 3).unwrap(),
        ];
        let n = 100_000;
        for law in &laws {
            let mass = integrate_line(|x| law.density(x), 1e-9, law.decay()).unwrap();
            assert!((mass.value - 1.0).abs() < 1e-6, "{}", law.name());
            let xs = initial_samples(law, n);
            let mean = xs.iter().sum::<f64>() / n as f64;
            let bound = 4.0 * law.sd().unwrap() / (n as f64).sqrt();
            assert!((mean - law.mean().unwrap()).abs() < bound, "{}", law.name());
            let cdf = |x: f64| law.cdf(x).unwrap();
            assert!(ks_statistic(&xs, &cdf).unwrap() < 1.63 / (n as f64).sqrt(), "{}", law.name());
        }
        assert!(SampleLaw::normal(0.0, 0.0, 1).is_err());
        assert!(SampleLaw::uniform(1.0, 1.0, 1).is_err());
    }

    #[test]
    fn pushforward_examples() {
        let law = normal(0.0, 1.0, 11);
        let n = 100_000;
        let p0 = pushforward_samples(&law, 0, n).unwrap();
        assert_eq!(p0.dropped, 0);
        assert_eq!(p0.samples, initial_samples(&law, n));

        let p5 = pushforward_samples(&law, 5, n).unwrap();
        assert!(!p5.flagged);
        let pos = p5.samples.iter().filter(|&&x| x > 0.0).count() as f64 / p5.samples.len() as f64;
        assert!((pos - 0.5).abs() < 4.0 / (n as f64).sqrt());

        let a = pushforward_samples(&law, 1, 1000).unwrap();
        let b = pushforward_samples(&law, 1, 1000).unwrap();
        assert_eq!(a, b);
        assert!(a.samples.iter().map(|x| x.abs()).sum::<f64>().is_finite());
        assert!(pushforward_samples(&law, 1, 0).is_err());
    }

    #[test]
    fn consecutive_pushforwards_differ_by_one_step() {
        let law = normal(0.3, 2.0, 5);
        let p7 = pushforward_samples(&law, 7, 5000).unwrap();
        let p8 = pushforward_samples(&law, 8, 5000).unwrap();
        let stepped: Vec<f64> = p7.samples.iter().map(|x| x - 1.0 / x).collect();
        assert_eq!(stepped, p8.samples);
    }

    #[test]
    fn birkhoff_examples() {
        let sq = GlobalObservable::square_wave();
        assert_eq!(birkhoff_average(&sq, 2.0, 2).unwrap(), 0.0);
        assert_eq!(birkhoff_average(&sq, 2.5, 1).unwrap(), 1.0);
        let c = GlobalObservable::constant(0.7);
        assert!((birkhoff_average(&c, 1.3, 9).unwrap() - 0.7).abs() < 1e-15);
        assert!(birkhoff_average(&sq, 1.0, 3).is_err());
        assert!(birkhoff_average(&sq, 1.0, 0).is_err());
    }

    #[test]
    fn ks_examples() {
        let n = 1000;
        let uniform = |x: f64| x.clamp(0.0, 1.0);
        let q: Vec<f64> = (0..n).map(|j| (j as f64 + 0.5) / n as f64).collect();
        assert!(ks_statistic(&q, &uniform).unwrap() <= 0.5 / n as f64 + 1e-12);
        assert!(ks_statistic(&[0.5; 10], &uniform).unwrap() >= 0.5);
        assert!(ks_statistic(&[], &uniform).is_err());

        let law = SampleLaw::uniform(0.0, 1.0, 8).unwrap();
        let xs = initial_samples(&law, 100_000);
        assert!(ks_statistic(&xs, &uniform).unwrap() < 1.95 / (1e5f64).sqrt());
    }

    #[test]
    fn strong_limit_fractional_part() {
        let f = GlobalObservable::fractional_part();
        let law = normal(0.0, 1.0, 21);
        let opts = DistOptions::default().with_ks_target(|x| x.clamp(0.0, 1.0));
        let r = strong_dist_limit_test(&f, &law, 30, 100_000, &opts).unwrap();
        assert!(!r.flagged());
        let zero = r.points.iter().find(|p| p.theta == 0.0).unwrap();
        assert_eq!(zero.empirical, Complex64::new(1.0, 0.0));
        for p in &r.points {
            assert!(p.empirical.norm() <= 1.0 + 1e-12);
            assert!((p.target.unwrap() - uniform_cf(p.theta)).norm() < 1e-9);
        }
        assert!(r.sup_deviation < 0.05, "{}", r.sup_deviation);
        assert!(r.ks.unwrap() < 0.02);
    }

    #[test]
    fn strong_limit_two_sided_indicator() {
        let f = GlobalObservable::two_limits_sharp(1.0, 0.0);
        let law = normal(3.0, 1.0, 2);
        let opts = DistOptions {
            theta_grid: vec![-3.0, -1.0, 0.0, 0.5, 2.0],
            ..DistOptions::default()
        };
        let r = strong_dist_limit_test(&f, &law, 100, 100_000, &opts).unwrap();
        for p in &r.points {
            let exact = 0.5 * (1.0 + Complex64::new(0.0, p.theta).exp());
            assert!((p.target.unwrap() - exact).norm() < 1e-9);
        }
        assert!(r.sup_deviation < 0.05, "{}", r.sup_deviation);
    }

    #[test]
    fn odd_observable_under_even_law_has_real_cf() {
        let f = GlobalObservable::square_wave();
        let n = 50_000;
        let law = normal(0.0, 1.0, 9);
        let opts = DistOptions {
            theta_grid: vec![0.3, 1.0, 2.5],
            ..DistOptions::default()
        };
        let r = strong_dist_limit_test(&f, &law, 3, n, &opts).unwrap();
        for p in &r.points {
            assert!(p.empirical.im.abs() < 4.0 / (n as f64).sqrt());
        }
    }

    #[test]
    fn birkhoff_k1_matches_strong_test_and_constant_is_degenerate() {
        let f = GlobalObservable::tent_periodized();
        let law = normal(0.0, 1.0, 4);
        let opts = DistOptions {
            theta_grid: vec![-2.0, 1.0, 7.0],
            ..DistOptions::default()
        };
        let a = strong_dist_limit_test(&f, &law, 5, 2000, &opts).unwrap();
        let b = birkhoff_dist_test(&f, &law, 1, 5, 2000, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_csv(), b.to_csv());

        let c = GlobalObservable::constant(0.25);
        let r = birkhoff_dist_test(&c, &law, 4, 10, 1000, &opts).unwrap();
        for p in &r.points {
            let exact = Complex64::new(0.0, 0.25 * p.theta).exp();
            assert!((p.empirical - exact).norm() < 1e-12);
        }
    }

    #[test]
    fn birkhoff_tent_deviation_shrinks_with_n() {
        let f = GlobalObservable::tent_periodized();
        let law = normal(0.0, 1.0, 13);
        let opts = DistOptions::default();
        let dev = |k, n| birkhoff_dist_test(&f, &law, k, n, 50_000, &opts).unwrap().sup_deviation;
        assert!(dev(1, 30) < 0.02);
        let (d30, d300) = (dev(3, 30), dev(3, 300));
        assert!(d300 < 0.6 * d30, "{d30} -> {d300}");
        let scan = birkhoff_scan(&f, &law, &[1, 2], &[5, 10], 2000, &opts).unwrap();
        assert_eq!(scan.len(), 4);
        assert!(scan.iter().all(|e| e.2 >= 0.0));
    }

    #[test]
    fn reports_are_seed_deterministic() {
        let f = GlobalObservable::fractional_part();
        let opts = DistOptions::default();
        let a = strong_dist_limit_test(&f, &normal(0.0, 1.0, 77), 10, 20_000, &opts).unwrap();
        let b = strong_dist_limit_test(&f, &normal(0.0, 1.0, 77), 10, 20_000, &opts).unwrap();
        let c = strong_dist_limit_test(&f, &normal(0.0, 1.0, 78), 10, 20_000, &opts).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_ne!(a.to_csv(), c.to_csv());
        assert!(a.to_csv().starts_with("theta,re_empirical,im_empirical,re_target,im_target,deviation\n"));
    }
}
