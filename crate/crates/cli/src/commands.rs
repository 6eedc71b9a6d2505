use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use multitaper::bench::{run_bench, BenchConfig};
use multitaper::bounds::{covariance_bound, local_psd_stats, sigma_stats, tail_probability, BoundReport};
use multitaper::dpss::{build_taper_bank, read_bank, select_num_tapers, write_bank, TaperBank};
use multitaper::estimators::{multitaper_exact, spectral_window, Method, SpectralEstimate};
use multitaper::io::{read_samples_bin, read_samples_csv, write_samples_bin, write_spectrum_csv};
use multitaper::method::{MethodSpec, TaperCount};
use multitaper::montecarlo::{simulate as run_simulation, write_report_csv, SimulationConfig};
use multitaper::synth::{multiband_fixture, ProcessSampler, Psd};
use multitaper::{Error, Result};
use serde_json::json;

use crate::{
    BenchArgs, BoundsArgs, DpssArgs, EstimateArgs, InputFormat, MethodName, OutputFormat, ReportFormat, SimulateArgs,
    TaperArgs, WindowArgs,
};

/// Opens `path` for writing, or stdout.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

fn taper_count(n: usize, w: f64, tapers: TaperArgs) -> Result<usize> {
    match (tapers.k, tapers.delta) {
        (Some(k), _) => Ok(k),
        (None, Some(delta)) => select_num_tapers(n, w, delta),
        (None, None) => Err(Error::Parameter("give --k or --delta".into())),
    }
}

fn default_l(n: usize, l: Option<usize>) -> usize {
    l.unwrap_or_else(|| (2 * n).next_power_of_two())
}

/// A PSD from `multiband`, a JSON file, or inline JSON.
fn load_psd(arg: &str) -> Result<Psd> {
    if arg == "multiband" {
        return Ok(Psd::Piecewise(multiband_fixture()));
    }
    if arg.trim_start().starts_with(['{', '[']) {
        return Psd::from_json(arg);
    }
    let text = std::fs::read_to_string(arg).map_err(|e| Error::Input(format!("{arg}: {e}")))?;
    Psd::from_json(&text)
}

pub fn dpss(a: DpssArgs) -> Result<()> {
    let k = taper_count(a.n, a.w, a.tapers)?;
    let bank = build_taper_bank(a.n, a.w, k)?;
    let mut out = sink(a.output.as_deref())?;
    writeln!(out, "k,lambda,one_minus_lambda")?;
    for (i, &lam) in bank.eigenvalues().iter().enumerate().take(k) {
        writeln!(out, "{i},{lam:.16e},{:.16e}", 1.0 - lam)?;
    }
    out.flush()?;
    if let Some(path) = a.bank {
        let mut f = BufWriter::new(File::create(path)?);
        write_bank(&bank, &mut f)?;
        f.flush()?;
    }
    eprintln!("K = {k}");
    Ok(())
}

fn read_input(path: &Path, format: Option<InputFormat>) -> Result<Vec<multitaper::Complex64>> {
    let format = format.unwrap_or(if path.extension().is_some_and(|e| e == "bin") {
        InputFormat::Bin
    } else {
        InputFormat::Csv
    });
    let file = open(path)?;
    match format {
        InputFormat::Csv => read_samples_csv(BufReader::new(file)),
        InputFormat::Bin => read_samples_bin(BufReader::new(file)),
    }
}

fn load_bank(path: &Path, n: usize, w: Option<f64>) -> Result<TaperBank> {
    let bank = read_bank(BufReader::new(open(path)?))?;
    if bank.n() != n {
        return Err(Error::Input(format!("bank built for n = {} but the input has {n} samples", bank.n())));
    }
    if let Some(w) = w {
        if (bank.w() - w).abs() > 1e-12 * w.max(1.0) {
            return Err(Error::Input(format!("bank built for w = {} but --w is {w}", bank.w())));
        }
    }
    Ok(bank)
}

pub fn estimate(a: EstimateArgs) -> Result<()> {
    let x = read_input(&a.input, a.input_format)?;
    let n = x.len();
    if let Some(expected) = a.n {
        if expected != n {
            return Err(Error::Input(format!("expected {expected} samples, read {n}")));
        }
    }
    if n == 0 {
        return Err(Error::Input("no samples".into()));
    }
    let l = default_l(n, a.l);

    let est: SpectralEstimate = match (&a.bank, a.method) {
        (Some(path), MethodName::Mt) => {
            let bank = load_bank(path, n, a.w)?;
            let k = match (a.tapers.k, a.tapers.delta) {
                (None, None) => bank.k_computed(),
                _ => taper_count(n, bank.w(), a.tapers)?,
            };
            multitaper_exact(&x, &bank, k, l)?
        }
        (Some(_), _) => return Err(Error::Parameter("--bank only applies to --method mt".into())),
        (None, method) => {
            let method = match method {
                MethodName::Periodogram => Method::Periodogram,
                MethodName::Single => Method::Single,
                MethodName::Mt => Method::Multitaper,
                MethodName::MtFast => Method::MultitaperApprox,
                MethodName::Adaptive => Method::Adaptive,
            };
            let mut spec = MethodSpec::new(method);
            spec.w = a.w;
            spec.count = match (a.tapers.k, a.tapers.delta) {
                (Some(k), _) => Some(TaperCount::Fixed(k)),
                (None, Some(d)) => Some(TaperCount::Delta(d)),
                (None, None) => None,
            };
            if method == Method::MultitaperApprox {
                spec.epsilon = Some(a.eps);
            }
            spec.prepare(n, None)?.estimate(&x, l)?
        }
    };

    let freqs: Vec<f64> = est.grid.frequencies().collect();
    let mut out = sink(a.output.as_deref())?;
    match a.format {
        OutputFormat::Csv => write_spectrum_csv(&freqs, &est.values, &mut out)?,
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut out, &est)?;
            writeln!(out)?;
        }
        OutputFormat::Bin => {
            for v in &est.values {
                out.write_all(&v.to_le_bytes())?;
            }
        }
    }
    out.flush()?;

    let sidecar = a.sidecar.or_else(|| match (est.method, &a.output) {
        (Method::MultitaperApprox, Some(o)) => {
            let mut s = o.clone().into_os_string();
            s.push(".json");
            Some(PathBuf::from(s))
        }
        _ => None,
    });
    if let Some(path) = sidecar {
        let summary = json!({
            "input": a.input,
            "method": est.method,
            "l": l,
            "meta": est.meta,
        });
        let mut f = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut f, &summary)?;
        writeln!(f)?;
        f.flush()?;
    }
    Ok(())
}

pub fn window(a: WindowArgs) -> Result<()> {
    let k = taper_count(a.n, a.w, a.tapers)?;
    let bank = build_taper_bank(a.n, a.w, k)?;
    let l = default_l(a.n, a.l);
    let values = spectral_window(&bank, k, l)?;
    let freqs: Vec<f64> = (0..l).map(|i| i as f64 / l as f64).collect();
    let mut out = sink(a.output.as_deref())?;
    write_spectrum_csv(&freqs, &values, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn bounds(a: BoundsArgs) -> Result<()> {
    let psd = load_psd(&a.psd)?;
    let psd = psd
        .as_piecewise()
        .ok_or_else(|| Error::Inapplicable("bounds need a piecewise-constant spectrum".into()))?;
    let k = taper_count(a.n, a.w, a.tapers)?;
    let bank = build_taper_bank(a.n, a.w, k)?;
    let eigs = bank.eigenvalues();

    let reports = a
        .frequencies
        .iter()
        .map(|&f| BoundReport::evaluate(psd, eigs, a.n, a.w, k, f))
        .collect::<Result<Vec<_>>>()?;
    let covariance = if a.covariance {
        if a.frequencies.len() < 2 {
            return Err(Error::Parameter("--covariance needs two --f values".into()));
        }
        let sig = sigma_stats(eigs, k)?;
        let s1 = local_psd_stats(psd, a.frequencies[0], a.w)?;
        let s2 = local_psd_stats(psd, a.frequencies[1], a.w)?;
        Some(covariance_bound(&s1, &s2, &sig, a.n)?)
    } else {
        None
    };
    let tails = a
        .betas
        .iter()
        .map(|&beta| {
            let kappa = reports[0].kappa_lower.filter(|v| *v > 0.0).ok_or_else(|| {
                Error::Inapplicable(format!("the concentration bound at f = {} is vacuous", reports[0].f))
            })?;
            let (up, low) = tail_probability(kappa, beta)?;
            Ok((beta, up, low))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = sink(a.output.as_deref())?;
    match a.format {
        ReportFormat::Text => {
            for (i, r) in reports.iter().enumerate() {
                if i > 0 {
                    writeln!(out)?;
                }
                write!(out, "{}", r.to_text())?;
            }
            if let Some(c) = covariance {
                writeln!(out, "covariance {c:e}")?;
            }
            for (beta, up, low) in &tails {
                writeln!(out, "tail beta={beta} upper {up:e} lower {low:e}")?;
            }
        }
        ReportFormat::Json => {
            let tails: Vec<_> =
                tails.iter().map(|(beta, up, low)| json!({ "beta": beta, "upper": up, "lower": low })).collect();
            let v = json!({ "reports": reports, "covariance": covariance, "tails": tails });
            serde_json::to_writer_pretty(&mut out, &v)?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn parse_band(s: &str) -> Result<(f64, f64)> {
    let bad = || Error::Parameter(format!("band '{s}' is not start:end"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let psd = load_psd(&a.psd)?;
    let methods = a.methods.iter().map(|m| m.parse()).collect::<Result<Vec<MethodSpec>>>()?;
    let bands = a.bands.iter().map(|b| parse_band(b)).collect::<Result<Vec<_>>>()?;
    let config = SimulationConfig {
        psd,
        n: a.n,
        l: a.l.unwrap_or(2 * a.n),
        trials: a.trials,
        seed: a.seed,
        methods,
        default_w: a.w,
        bands,
    };
    let report = run_simulation(&config)?;
    if !report.mc_reliable {
        eprintln!("warning: {} trial(s) are too few for standard errors", report.trials);
    }

    let mut out = sink(a.output.as_deref())?;
    serde_json::to_writer_pretty(&mut out, &json!({ "psd": config.psd.to_json(), "report": report }))?;
    writeln!(out)?;
    out.flush()?;

    if let Some(path) = a.csv {
        let mut f = BufWriter::new(File::create(path)?);
        write_report_csv(&report, &mut f)?;
        f.flush()?;
    }
    if let Some(path) = a.export_samples {
        let psd: &dyn multitaper::synth::PowerSpectrum = &config.psd;
        let sampler = ProcessSampler::new(psd, a.n, a.seed)?;
        let mut f = BufWriter::new(File::create(path)?);
        for x in sampler.draw_many(0, a.export_count) {
            write_samples_bin(&x, &mut f)?;
        }
        f.flush()?;
    }
    Ok(())
}

pub fn bench(a: BenchArgs) -> Result<()> {
    let mut config = BenchConfig {
        epsilons: a.epsilons,
        delta: a.delta,
        exact_max_n: a.exact_max_n,
        repeats: a.repeats,
        seed: a.seed,
        ..BenchConfig::default()
    };
    if !a.ns.is_empty() {
        config.ns = a.ns;
    }
    let report = run_bench(&config, |row| {
        let exact = row.exact.as_ref().map_or("skipped".to_string(), |t| format!("{:.3e} s", t.compute));
        let approx: Vec<String> =
            row.approx.iter().map(|t| format!("eps={:e} {:.3e} s", t.epsilon, t.timing.compute)).collect();
        eprintln!("n={} k={} exact {exact}; {}", row.n, row.k, approx.join(", "));
    })?;
    let mut out = sink(a.output.as_deref())?;
    serde_json::to_writer_pretty(&mut out, &report)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}
