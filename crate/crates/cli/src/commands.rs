//! Subcommand implementations. Each returns the process exit status and
//! pushes non-fatal problems onto `warnings`.

use anyhow::{bail, Context, Result};
use diracloc::dynamics::{
    build_wavepacket, evolve, log_times, moment_series, project_window, synthesize_density,
    MomentSeries,
};
use diracloc::error::Error;
use diracloc::fields::{make_profile, verify_hypothesis, Family, FieldProfile, HypothesisReport};
use diracloc::operators::{assemble_channel_matrix, Channel, RadialGrid};
use diracloc::spectral::{
    agmon_check, bargmann_bound, bargmann_params, default_eps, solve_channels, EigenSet,
};
use diracloc::stats::linear_fit;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{verify_manifest, Csv, Writer};

/// Fitted growth exponents at or below this count as localized dynamics.
pub const LOCALIZED_EXPONENT: f64 = 0.3;
/// Fitted growth exponents at or above this count as delocalized dynamics.
pub const DELOCALIZED_EXPONENT: f64 = 1.5;

pub struct Run<'a> {
    pub cfg: &'a RunConfig,
    pub out: &'a mut Writer,
    pub warnings: &'a mut Vec<String>,
}

fn probe(cfg: &RunConfig, profile: &FieldProfile) -> Result<HypothesisReport> {
    let p = cfg.probe;
    Ok(verify_hypothesis(profile, p.r_start, p.r_end, p.n)?)
}

fn sets_of(solved: Vec<(diracloc::operators::ChannelOperator, EigenSet)>) -> Vec<EigenSet> {
    solved.into_iter().map(|(_, s)| s).collect()
}

fn window(cfg: &RunConfig) -> (f64, f64) {
    (cfg.window[0], cfg.window[1])
}

#[derive(Serialize)]
struct VerifyDoc<'a> {
    expected_regime: String,
    confirmed: bool,
    report: &'a HypothesisReport,
}

/// Exit 0 when the probes confirm the expected regime, 2 otherwise.
pub fn verify(run: Run) -> Result<u8> {
    let profile = run.cfg.profile.build()?;
    let report = probe(run.cfg, &profile)?;
    let confirmed = report.regime == run.cfg.expect_regime;
    if !report.con0_pass {
        run.warnings
            .push("|A| does not grow on the probe range; localization hypothesis fails".into());
    }
    if !report.skipped.is_empty() {
        run.warnings.push(format!(
            "A vanished at {} probe radii",
            report.skipped.len()
        ));
    }
    run.out.json(
        "verify.json",
        &VerifyDoc {
            expected_regime: run.cfg.expect_regime.to_string(),
            confirmed,
            report: &report,
        },
    )?;
    println!(
        "regime={} expected={} con0={} limsup|V/A|={:.4} limsup|A/V|={:.4} margin={:.4}",
        report.regime,
        run.cfg.expect_regime,
        report.con0_pass,
        report.con1_limsup,
        report.reciprocal_limsup,
        report.margin
    );
    Ok(if confirmed { 0 } else { 2 })
}

#[derive(Serialize)]
struct SpectrumDoc {
    h: f64,
    n: usize,
    r_max: f64,
    window: (f64, f64),
    count_energy: f64,
    channels: usize,
    eigenvalues: usize,
    bargmann: Option<BargmannSummary>,
}

#[derive(Serialize)]
struct BargmannSummary {
    eps: f64,
    delta: f64,
    ball_radius: f64,
    c_local: f64,
    channels: usize,
    all_within_bound: bool,
    max_ratio: f64,
    /// Slope of log(N/bound) against log|m| over channels with N > 0.
    ratio_slope: Option<f64>,
}

pub fn spectrum(run: Run) -> Result<u8> {
    let cfg = run.cfg;
    let channels = cfg.channels.channels();
    if channels.is_empty() {
        bail!("channel range {:?} is empty", cfg.channels);
    }
    let profile = cfg.profile.build()?;
    let (h, n) = cfg.grid_for(&profile, RunConfig::max_abs_m(&channels))?;
    let solved = solve_channels(&profile, &channels, h, n, window(cfg))?;

    let mut eig = Csv::new(
        run.out.hash(),
        &[("h", h.to_string()), ("n", n.to_string())],
        &["j", "m", "k", "E", "residual"],
    );
    let mut total = 0;
    for (_, set) in &solved {
        for (k, p) in set.pairs.iter().enumerate() {
            eig.row(&[&set.channel.j, &set.channel.m(), &k, &p.energy, &p.residual]);
        }
        total += set.len();
    }
    run.out.csv("eigenvalues.csv", eig)?;

    let energy = cfg.count_energy();
    let bargmann = match bargmann_table(run.out, run.warnings, cfg, &profile, &solved, energy) {
        Ok(b) => b,
        Err(e) => {
            run.warnings.push(format!("count bound skipped: {e:#}"));
            None
        }
    };
    if let Some(b) = &bargmann {
        if !b.all_within_bound {
            run.warnings.push(format!(
                "count exceeds bound in some channel (max ratio {})",
                b.max_ratio
            ));
        }
    }
    let doc = SpectrumDoc {
        h,
        n,
        r_max: h * n as f64,
        window: window(cfg),
        count_energy: energy,
        channels: channels.len(),
        eigenvalues: total,
        bargmann,
    };
    run.out.json("spectrum.json", &doc)?;
    println!(
        "{} eigenvalues in [{}, {}] over {} channels (h={h}, n={n})",
        total, cfg.window[0], cfg.window[1], doc.channels
    );
    Ok(0)
}

fn bargmann_table(
    out: &mut Writer,
    warnings: &mut Vec<String>,
    cfg: &RunConfig,
    profile: &FieldProfile,
    solved: &[(diracloc::operators::ChannelOperator, EigenSet)],
    energy: f64,
) -> Result<Option<BargmannSummary>> {
    let eps = match cfg.delta_eps {
        Some(e) => e,
        None => default_eps(profile)?,
    };
    let params = bargmann_params(profile, eps)?;
    let mut csv = Csv::new(
        out.hash(),
        &[
            ("energy", energy.to_string()),
            ("eps", params.eps.to_string()),
            ("delta", params.delta.to_string()),
            ("ball_radius", params.ball_radius.to_string()),
            ("c_local", params.c_local.to_string()),
        ],
        &["j", "m", "N", "bound", "majorant", "ratio", "r_j"],
    );
    let mut rows = 0;
    let mut within = true;
    let mut max_ratio: f64 = 0.0;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (op, _) in solved {
        if op.channel.m().abs() <= 1.0 {
            continue;
        }
        let e = match bargmann_bound(profile, op, energy, &params) {
            Ok(e) => e,
            Err(err) => {
                warnings.push(format!("count bound j={}: {err}", op.channel.j));
                continue;
            }
        };
        csv.row(&[
            &e.j,
            &e.m,
            &e.n_numeric,
            &e.bound,
            &e.majorant,
            &e.ratio,
            &e.r_j,
        ]);
        rows += 1;
        within &= e.n_numeric as f64 <= e.bound;
        max_ratio = max_ratio.max(e.ratio);
        if e.n_numeric > 0 && e.ratio > 0.0 {
            xs.push(e.m.abs().ln());
            ys.push(e.ratio.ln());
        }
    }
    out.csv("bargmann.csv", csv)?;
    Ok(Some(BargmannSummary {
        eps: params.eps,
        delta: params.delta,
        ball_radius: params.ball_radius,
        c_local: params.c_local,
        channels: rows,
        all_within_bound: within,
        max_ratio,
        ratio_slope: linear_fit(&xs, &ys).map(|(s, _)| s),
    }))
}

#[derive(Serialize)]
struct LocalizeDoc {
    kappa: f64,
    window: (f64, f64),
    j_max: u32,
    h: f64,
    n: usize,
    r_max: f64,
    field_regime: String,
    tail_bound: f64,
    fitted_exponent: f64,
    sup_all: f64,
    sup_early: f64,
    sup_last_decade: f64,
    /// Whole-run maximum within 1.5× the maximum up to T/10.
    sup_proxy: bool,
    stabilized_1_1: bool,
    thresholds: (f64, f64),
    dynamic_regime: &'static str,
    box_check_change: Option<f64>,
}

fn run_series(
    cfg: &RunConfig,
    profile: &FieldProfile,
    h: f64,
    n: usize,
    times: &[f64],
) -> Result<(MomentSeries, diracloc::dynamics::WavePacket, Vec<EigenSet>)> {
    let wp_cfg = cfg.wavepacket;
    let jm = wp_cfg.j_max as i64;
    let channels: Vec<Channel> = (-jm..=jm).map(Channel::new).collect();
    let sets = sets_of(solve_channels(profile, &channels, h, n, window(cfg))?);
    let wp = build_wavepacket(wp_cfg.shape, wp_cfg.decay, cfg.kappa, wp_cfg.j_max, |ch| {
        RadialGrid::adapted(h, n, profile, ch)
    })?;
    let proj = project_window(&wp, &sets)?;
    let series = moment_series(&proj, &sets, times, cfg.kappa, cfg.delta0)?;
    Ok((series, proj, sets))
}

pub fn localize(run: Run) -> Result<u8> {
    let cfg = run.cfg;
    let profile = cfg.profile.build()?;
    let report = probe(cfg, &profile)?;
    let j_max = cfg.wavepacket.j_max;
    let (h, n) = cfg.grid_for(&profile, j_max as f64 + 0.5)?;
    let t = cfg.times;
    let times = log_times(t.t_min, t.t_max, t.per_decade);
    let (series, proj, sets) = run_series(cfg, &profile, h, n, &times)?;

    let mut columns = vec!["t".to_string(), "M_total".to_string()];
    columns.extend(series.per_channel.iter().map(|(j, _)| format!("M_{j}")));
    let col_refs: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut csv = Csv::new(
        run.out.hash(),
        &[
            ("kappa", cfg.kappa.to_string()),
            ("h", h.to_string()),
            ("n", n.to_string()),
        ],
        &col_refs,
    );
    for (i, t) in series.times.iter().enumerate() {
        let mut row: Vec<&dyn std::fmt::Display> = vec![t, &series.total[i]];
        row.extend(
            series
                .per_channel
                .iter()
                .map(|(_, v)| &v[i] as &dyn std::fmt::Display),
        );
        csv.row(&row);
    }
    run.out.csv("moments.csv", csv)?;

    let box_check_change = if cfg.box_check {
        let (doubled, _, _) = run_series(cfg, &profile, h, 2 * n, &times)?;
        Some(
            series
                .total
                .iter()
                .zip(&doubled.total)
                .map(|(a, b)| ((a - b) / a).abs())
                .fold(0.0, f64::max),
        )
    } else {
        None
    };

    if let Some(d) = cfg.density {
        let state = evolve(&proj, &sets, d.time)?;
        let field = synthesize_density(&state, d.theta_points)?;
        if d.theta_points < 4 * (j_max as usize + 1) {
            run.warnings.push(format!(
                "density: {} angles under-resolve channels up to |j| = {j_max}",
                d.theta_points
            ));
        }
        let mut csv = Csv::new(
            run.out.hash(),
            &[("time", d.time.to_string())],
            &["r", "theta", "density"],
        );
        for (i, r) in field.radii.iter().enumerate() {
            for (l, th) in field.thetas.iter().enumerate() {
                csv.row(&[r, th, &field.density(i, l)]);
            }
        }
        run.out.csv("density.csv", csv)?;
    }

    let e = series.fitted_exponent;
    let dynamic_regime = if e <= LOCALIZED_EXPONENT {
        "localized"
    } else if e >= DELOCALIZED_EXPONENT {
        "delocalized"
    } else {
        "intermediate"
    };
    let doc = LocalizeDoc {
        kappa: cfg.kappa,
        window: window(cfg),
        j_max,
        h,
        n,
        r_max: h * n as f64,
        field_regime: report.regime.to_string(),
        tail_bound: series.tail_bound,
        fitted_exponent: e,
        sup_all: series.sup_all,
        sup_early: series.sup_early,
        sup_last_decade: series.sup_last_decade,
        sup_proxy: series.stabilized(1.5),
        stabilized_1_1: series.stabilized(1.1),
        thresholds: (LOCALIZED_EXPONENT, DELOCALIZED_EXPONENT),
        dynamic_regime,
        box_check_change,
    };
    run.out.json("summary.json", &doc)?;
    println!(
        "fitted exponent {e:.4} ({dynamic_regime}); sup M {:.6} vs early {:.6}; field regime {}",
        series.sup_all, series.sup_early, report.regime
    );
    Ok(0)
}

#[derive(Serialize)]
struct AgmonChannel {
    j: i64,
    r_j: f64,
    r_max: f64,
    reliable: bool,
    eigenpairs: usize,
    max_ratio: Option<f64>,
}

#[derive(Serialize)]
struct AgmonDoc {
    gamma: f64,
    h: f64,
    n: usize,
    channels: Vec<AgmonChannel>,
    /// Slope of the largest log ratio per channel against log|m|.
    trend_slope: Option<f64>,
}

pub fn agmon(run: Run) -> Result<u8> {
    let cfg = run.cfg;
    let channels = cfg.channels.channels();
    if channels.is_empty() {
        bail!("channel range {:?} is empty", cfg.channels);
    }
    let profile = cfg.profile.build()?;
    let (h, n) = cfg.grid_for(&profile, RunConfig::max_abs_m(&channels))?;
    let solved = solve_channels(&profile, &channels, h, n, window(cfg))?;
    let mut csv = Csv::new(
        run.out.hash(),
        &[
            ("gamma", cfg.gamma.to_string()),
            ("delta0", cfg.delta0.to_string()),
        ],
        &[
            "j",
            "k",
            "E",
            "gamma",
            "lhs",
            "rhs_scale",
            "ratio",
            "decay_slope",
            "reliable",
        ],
    );
    let mut summary = Vec::new();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (_, set) in &solved {
        let j = set.channel.j;
        let rep = match agmon_check(&profile, set, cfg.gamma, cfg.delta0) {
            Ok(r) => r,
            Err(Error::GridTooSmall(msg)) => {
                run.warnings.push(format!("agmon j={j} skipped: {msg}"));
                continue;
            }
            Err(e) => return Err(e).with_context(|| format!("agmon check in channel j = {j}")),
        };
        if !rep.reliable {
            run.warnings.push(format!(
                "agmon j={j}: box radius {} is under six turning radii ({})",
                rep.r_max, rep.r_j
            ));
        }
        for row in &rep.rows {
            let slope = row.decay_slope.map_or(String::new(), |s| s.to_string());
            csv.row(&[
                &row.j,
                &row.k,
                &row.energy,
                &row.gamma,
                &row.lhs,
                &row.rhs_scale,
                &row.ratio,
                &slope,
                &row.reliable,
            ]);
        }
        if let Some(l) = rep.max_log_ratio() {
            xs.push(set.channel.m().abs().ln());
            ys.push(l);
        }
        summary.push(AgmonChannel {
            j,
            r_j: rep.r_j,
            r_max: rep.r_max,
            reliable: rep.reliable,
            eigenpairs: rep.rows.len(),
            max_ratio: rep.max_ratio(),
        });
    }
    run.out.csv("agmon.csv", csv)?;
    let doc = AgmonDoc {
        gamma: cfg.gamma,
        h,
        n,
        channels: summary,
        trend_slope: linear_fit(&xs, &ys).map(|(s, _)| s),
    };
    run.out.json("agmon.json", &doc)?;
    println!(
        "{} channels checked, trend slope {}",
        doc.channels.len(),
        doc.trend_slope.map_or("n/a".into(), |s| format!("{s:.3}"))
    );
    Ok(0)
}

/// Fast numerical sanity checks followed by a manifest cross-reference when
/// the output directory holds one.
pub fn selftest(run: Run) -> Result<u8> {
    let mut failures = 0;
    let mut check = |name: &str, ok: bool, detail: String| {
        println!("{} {name}: {detail}", if ok { "ok  " } else { "FAIL" });
        if !ok {
            failures += 1;
        }
    };

    let landau = make_profile(Family::ConstantB, &[1.0])?;
    let ch = Channel::new(0);
    let grid = RadialGrid::adapted(0.02, 1000, &landau, ch)?;
    let op = assemble_channel_matrix(&landau, ch, grid)?;
    let levels = op.matrix.eigenvalues_in(-0.5, 1.6);
    let err = match levels.as_slice() {
        [a, b] => a.abs().max((b - 2f64.sqrt()).abs()),
        _ => f64::INFINITY,
    };
    check(
        "landau levels",
        err < 1e-2,
        format!("{levels:?}, error {err:.2e}"),
    );

    let linear = make_profile(Family::Linear, &[1.0, 0.3])?;
    let report = verify_hypothesis(&linear, 1.0, 1e3, 32)?;
    check(
        "hypothesis probe",
        report.regime == diracloc::fields::Regime::Localized,
        format!("linear A=r, V=0.3r classified {}", report.regime),
    );

    let dir = &run.cfg.out_dir;
    if dir.join(crate::output::MANIFEST).exists() {
        match verify_manifest(dir, None) {
            Ok(n) => check(
                "manifest",
                true,
                format!("{n} artifacts carry the manifest hash"),
            ),
            Err(e) => check("manifest", false, format!("{e:#}")),
        }
    } else {
        run.warnings.push(format!(
            "no manifest in {}; cross-reference skipped",
            dir.display()
        ));
    }
    Ok(if failures == 0 { 0 } else { 1 })
}
