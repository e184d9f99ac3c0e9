use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use serde_json::json;
use solenoid_kms::campaign::{self, SuiteReport};
use solenoid_kms::circle::Arc;
use solenoid_kms::cycle::{self, CycleError};
use solenoid_kms::kms::{
    extreme_state_from_solenoid, factors_through_solenoid, make_theta_seq, reversed_density_state, trace_state,
    KmsState, SolenoidPoint, ThetaSeq,
};
use solenoid_kms::measures::{
    check_subinvariance, decompose_into_extremes, extremality_probe, extreme_combination, lebesgue, make_mnr, make_mr,
    CircleMeasure,
};
use solenoid_kms::toeplitz::ToeplitzElement;

use crate::config::{RunConfig, MAX_DYADIC_LEVEL};
use crate::output::{self, Printer};
use crate::{CycleCmd, KmsCmd, MeasureCmd};

pub fn measure(cmd: MeasureCmd, cfg: &RunConfig, out: &Printer) -> Result<bool> {
    match cmd {
        MeasureCmd::Mr { r, arcs, points } => {
            let m = make_mr(r)?;
            if arcs.is_empty() {
                say!("t,density");
                for t in sample_points(points) {
                    say!("{},{}", out.num(t), out.num(m.density(t)));
                }
            } else {
                for text in &arcs {
                    let [a, b] = parse_list(text)?[..] else {
                        bail!("arc must be `start,end`, got {text:?}");
                    };
                    say!("{}", out.num(m.measure_arc(&Arc::from_endpoints(a, b)?)));
                }
            }
            Ok(true)
        }
        MeasureCmd::Subinv { r, measure, grid, tol } => {
            let started = Instant::now();
            let m = parse_measure(&measure, r)?;
            let [n_t, n_s] = parse_list(&grid)?[..] else {
                bail!("grid must be `n_t,n_s`, got {grid:?}");
            };
            let rep = check_subinvariance(&m, r, (n_t as usize, n_s as usize), tol)?;
            let witness = rep.witness.as_ref().map(serde_json::to_value).transpose()?;
            let report = output::single_report(
                "subinvariance",
                json!({"r": r, "measure": measure, "grid": [n_t, n_s], "violation": rep.worst_violation}),
                rep.worst_violation,
                tol,
                rep.cases,
                witness,
                started,
            );
            out.reports(&[report])
        }
        MeasureCmd::Decompose { r, n, measure } => {
            let n = dyadic_level(n.unwrap_or(cfg.n))?;
            let m = parse_measure(&measure, r)?;
            let weights = decompose_into_extremes(&m, r, n)?;
            let rebuilt = extreme_combination(&weights, r, n)?;
            let err = cycle::measure_to_vector(&m, n)
                .iter()
                .zip(cycle::measure_to_vector(&rebuilt, n))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            say!("j,weight");
            for (j, w) in weights.iter().enumerate() {
                say!("{j},{}", out.num(*w));
            }
            say!("reconstruction_error,{err:e}");
            Ok(true)
        }
        MeasureCmd::L1Curve { r, n_max, panels } => {
            let curve = campaign::l1_curve(r, n_max, panels)?;
            say!("n,l1");
            for (n, v) in &curve.values {
                say!("{n},{v:e}");
            }
            let decreasing = curve.values.windows(2).all(|w| w[1].1 < w[0].1);
            eprintln!("strictly decreasing: {decreasing}");
            Ok(true)
        }
        MeasureCmd::Probe { r, n, measure, tol } => {
            let n = dyadic_level(n.unwrap_or(cfg.n))?;
            let verdict = extremality_probe(&parse_measure(&measure, r)?, r, n, tol)?;
            say!("{verdict:?}");
            Ok(true)
        }
    }
}

pub fn cycle(cmd: CycleCmd, cfg: &RunConfig, out: &Printer) -> Result<bool> {
    match cmd {
        CycleCmd::Vectors { n, r } => {
            let n = dyadic_level(n.unwrap_or(cfg.n))?;
            for row in cycle::extreme_vectors(n, r)? {
                say!("{}", out.row(&row));
            }
            Ok(true)
        }
        CycleCmd::Decompose { n, r, x } => {
            let x = parse_list(&x)?;
            let n = match n {
                Some(n) => n,
                None if x.len().is_power_of_two() => x.len().trailing_zeros(),
                None => bail!("vector length {} is not a power of two", x.len()),
            };
            match cycle::decompose_subinvariant(&x, dyadic_level(n)?, r) {
                Ok(weights) => {
                    say!("{}", out.row(&weights));
                    Ok(true)
                }
                Err(CycleError::NotSubinvariant { index, value }) => {
                    Err(anyhow!("NotSubinvariant index {index} (resolvent entry {value:e})"))
                }
                Err(e) => Err(e.into()),
            }
        }
    }
}

pub fn kms(cmd: KmsCmd, cfg: &RunConfig, out: &Printer) -> Result<bool> {
    match cmd {
        KmsCmd::Eval {
            expr,
            level,
            solenoid,
            state,
        } => {
            let point = solenoid.as_deref().map(parse_list).transpose()?;
            let depth = match &point {
                Some(c) if c.is_empty() => bail!("--solenoid needs at least one coordinate"),
                Some(c) => c.len() as u32 - 1,
                None => cfg.depth,
            };
            let theta = make_theta_seq(cfg.cover, cfg.theta0, depth, cfg.beta)?;
            let kind = state.unwrap_or_else(|| if cfg.beta == 0.0 { "trace" } else { "extreme" }.to_string());
            let phi = match kind.as_str() {
                "extreme" => {
                    let p = match point {
                        Some(c) => SolenoidPoint::new(c, cfg.cover)?,
                        None => SolenoidPoint::zero(depth),
                    };
                    extreme_state_from_solenoid(&p, &theta)?
                }
                "trace" => trace_state(&theta)?,
                "reversed" => reversed_density_state(&theta)?,
                other => bail!("unknown state {other:?}; expected extreme, trace or reversed"),
            };
            let x = ToeplitzElement::parse(&expr, theta.level(level)?)?;
            let v = phi.evaluate(&x)?;
            if v.im.abs() <= 1e-15 * v.re.abs().max(1.0) {
                say!("{}", out.num(v.re));
            } else {
                say!(
                    "{}{}{}i",
                    out.num(v.re),
                    if v.im < 0.0 { "-" } else { "+" },
                    out.num(v.im.abs())
                );
            }
            Ok(true)
        }
        KmsCmd::Verify { out: path } => {
            let reports = campaign::verify_campaign(&cfg.campaign(), &cfg.tolerances);
            finish(out, &reports, path.as_deref())
        }
        KmsCmd::Trace0 { out: path } => {
            let reports = vec![campaign::trace_suite(&cfg.campaign(), cfg.tolerances.trace)];
            finish(out, &reports, path.as_deref())
        }
        KmsCmd::FactorTest => {
            let theta = make_theta_seq(cfg.cover, cfg.theta0, cfg.depth, cfg.beta)?;
            let states = campaign::random_states(&theta, cfg.states, cfg.seed)?;
            let mut all = true;
            for (k, phi) in states.iter().enumerate() {
                let ft = factors_through_solenoid(phi)?;
                all &= ft.factors;
                say!(
                    "state {k}: factors={} gap_values=[{}]",
                    ft.factors,
                    out.row(&ft.gap_values)
                );
            }
            say!("{all}");
            Ok(true)
        }
    }
}

/// Every suite at the configured parameters, plus the fixed-parameter suites
/// for cycle vectors, L1 approximation, pushforwards, negative beta and Ω(0).
pub fn report(
    cfg: &RunConfig,
    out: &Printer,
    path: &Path,
    density_dir: Option<&Path>,
    density_points: usize,
) -> Result<bool> {
    let tol = &cfg.tolerances;
    let rates = [0.1, 1.0, 2.0 * std::f64::consts::LN_2, 5.0];
    let mut reports = vec![
        campaign::cycle_resolvent_suite(&[1, 2, 3, 4], &rates, tol.cycle_resolvent),
        campaign::cycle_roundtrip_suite(&[1, 2, 3, 4], &rates, 200, cfg.seed, tol.cycle_roundtrip),
    ];
    reports.extend(campaign::l1_suites(1.0, 10, 256, tol.quadrature, tol.l1_final));
    reports.push(campaign::pushforward_suite(
        &[2, 3],
        &[0.5, 2.0],
        &[0.0, 0.3, 0.77],
        64,
        cfg.seed,
        tol.pushforward,
    ));
    reports.push(campaign::negative_beta_suite(cfg.cover, cfg.theta0, cfg.depth));
    reports.push(campaign::omega_zero_suite(50, cfg.seed));
    reports.extend(campaign::verify_campaign(&cfg.campaign(), tol));
    reports.push(campaign::trace_suite(&cfg.campaign(), tol.trace));
    output::write_reports(path, &reports)?;
    if let Some(dir) = density_dir {
        write_densities(cfg, dir, density_points)?;
    }
    let pass = out.reports(&reports)?;
    eprintln!("wrote {}", path.display());
    Ok(pass)
}

fn finish(out: &Printer, reports: &[SuiteReport], path: Option<&Path>) -> Result<bool> {
    if let Some(p) = path {
        output::write_reports(p, reports)?;
    }
    out.reports(reports)
}

/// One table per level of the tower of the extreme state at the zero
/// solenoid point (the trace at beta = 0).
fn write_densities(cfg: &RunConfig, dir: &Path, points: usize) -> Result<()> {
    let theta = match make_theta_seq(cfg.cover, cfg.theta0, cfg.depth, cfg.beta) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("skipping density tables: {e}");
            return Ok(());
        }
    };
    let phi = reference_state(&theta)?;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (j, m) in phi.tower().measures().iter().enumerate() {
        let path = dir.join(format!("density_level_{j}.csv"));
        std::fs::write(&path, density_table(m, points)).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn reference_state(theta: &ThetaSeq) -> Result<KmsState> {
    Ok(if theta.beta() == 0.0 {
        trace_state(theta)?
    } else {
        extreme_state_from_solenoid(&SolenoidPoint::zero(theta.depth()), theta)?
    })
}

fn density_table(m: &CircleMeasure, points: usize) -> String {
    let mut s = String::from("t,density\n");
    for t in sample_points(points) {
        let _ = writeln!(s, "{t:e},{:e}", m.density(t));
    }
    s
}

fn sample_points(points: usize) -> impl Iterator<Item = f64> {
    (0..points).map(move |i| i as f64 / points as f64)
}

fn dyadic_level(n: u32) -> Result<u32> {
    if n > MAX_DYADIC_LEVEL {
        bail!("dyadic level must be at most {MAX_DYADIC_LEVEL}, got {n}");
    }
    Ok(n)
}

fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("not a number: {t:?}")))
        .collect()
}

/// `lebesgue`, `mr[:rate]`, `mnr:n[:rate]` or `reversed[:rate]`, with an
/// optional `@shift` rotation.
fn parse_measure(spec: &str, default_rate: f64) -> Result<CircleMeasure> {
    let (body, shift) = match spec.split_once('@') {
        Some((b, s)) => (
            b,
            Some(
                s.trim()
                    .parse::<f64>()
                    .with_context(|| format!("bad shift in {spec:?}"))?,
            ),
        ),
        None => (spec, None),
    };
    let parts: Vec<&str> = body.split(':').map(str::trim).collect();
    let rate = |i: usize| -> Result<f64> {
        match parts.get(i) {
            Some(t) => t.parse().with_context(|| format!("bad rate in {spec:?}")),
            None => Ok(default_rate),
        }
    };
    let m = match (parts[0], parts.len()) {
        ("lebesgue", 1) => lebesgue(),
        ("mr", 1 | 2) => make_mr(rate(1)?)?,
        ("reversed", 1 | 2) => make_mr(rate(1)?)?.reflect(),
        ("mnr", 2 | 3) => {
            let n: u32 = parts[1].parse().with_context(|| format!("bad level in {spec:?}"))?;
            make_mnr(dyadic_level(n)?, rate(2)?)?
        }
        _ => bail!("unknown measure {spec:?}; expected lebesgue, mr[:rate], mnr:n[:rate] or reversed[:rate]"),
    };
    Ok(match shift {
        Some(s) => m.rotate(s),
        None => m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measure_specs() {
        let m = parse_measure("mr:2@0.25", 1.0).unwrap();
        let direct = make_mr(2.0).unwrap().rotate(0.25);
        assert!((m.density(0.4) - direct.density(0.4)).abs() < 1e-15);
        assert!((parse_measure("lebesgue", 3.0).unwrap().density(0.7) - 1.0).abs() < 1e-15);
        assert!(parse_measure("mnr:3", 1.0).is_ok());
        assert!(parse_measure("mnr:15", 1.0).is_err());
        assert!(parse_measure("lebesgue:2", 1.0).is_err());
        assert!(parse_measure("gauss", 1.0).is_err());
    }

    #[test]
    fn lists() {
        assert_eq!(parse_list("0.9, 0.1").unwrap(), vec![0.9, 0.1]);
        assert!(parse_list("0.9,x").is_err());
    }
}
