use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use multiecho::io::{
    export_difference, export_pgm, load_kspace, load_mask, load_mef, quantize_f32, save_kspace,
    save_mask, save_mef, save_record, write_json,
};
use multiecho::lcurve::lcurve_greedy;
use multiecho::metrics::{snr_db, snr_db_per_echo, snr_serde, RunRecord};
use multiecho::operators::generate_mask;
use multiecho::phantom::{generate_phantom, simulate_acquisition};
use multiecho::{KSpaceData, Method, MultiEchoImage, SamplingMask};
use serde::Serialize;

use crate::config::RunConfig;

pub struct Workspace {
    pub out: PathBuf,
    pub cfg: RunConfig,
}

impl Workspace {
    fn truth_path(&self) -> PathBuf {
        self.cfg
            .truth_path
            .clone()
            .unwrap_or_else(|| self.out.join("truth"))
    }

    fn mask_path(&self) -> PathBuf {
        self.cfg
            .mask_path
            .clone()
            .unwrap_or_else(|| self.out.join("mask.json"))
    }

    fn kspace_path(&self) -> PathBuf {
        self.cfg
            .kspace_path
            .clone()
            .unwrap_or_else(|| self.out.join("kspace"))
    }

    fn recon_path(&self, m: Method) -> PathBuf {
        self.out.join(format!("recon_{m}"))
    }

    fn record_path(&self, m: Method) -> PathBuf {
        self.out.join(format!("record_{m}.json"))
    }

    fn write_config(&self, tag: &str) -> Result<()> {
        write_json(&self.out.join(format!("config_{tag}.json")), &self.cfg)?;
        Ok(())
    }

    fn load_truth(&self) -> Result<MultiEchoImage> {
        let p = self.truth_path();
        load_mef(&p).with_context(|| {
            format!(
                "loading ground truth {} (run `phantom` first)",
                p.with_extension("json").display()
            )
        })
    }

    fn load_mask(&self) -> Result<SamplingMask> {
        let p = self.mask_path();
        load_mask(&p).with_context(|| format!("loading mask {} (run `mask` first)", p.display()))
    }

    fn load_kspace(&self) -> Result<KSpaceData> {
        let p = self.kspace_path();
        load_kspace(&p).with_context(|| {
            format!(
                "loading k-space {} (run `simulate` first)",
                p.with_extension("kbin").display()
            )
        })
    }
}

pub fn phantom(ws: &Workspace) -> Result<()> {
    let truth = generate_phantom(&ws.cfg.phantom)?;
    save_mef(&ws.out.join("truth"), &truth)?;
    ws.write_config("phantom")?;
    println!(
        "wrote {}x{}x{} phantom to {}",
        truth.height(),
        truth.width(),
        truth.echoes(),
        ws.out.join("truth.bin").display()
    );
    Ok(())
}

pub fn mask(ws: &Workspace) -> Result<()> {
    let mask = generate_mask(&ws.cfg.mask_config())?;
    let path = ws.out.join("mask.json");
    save_mask(&path, &mask)?;
    ws.write_config("mask")?;
    println!(
        "wrote mask with {} of {} lines per echo ({:.1}%) to {}",
        mask.echo_lines(0).len(),
        mask.height(),
        100.0 * mask.sampling_ratio(),
        path.display()
    );
    Ok(())
}

pub fn simulate(ws: &Workspace) -> Result<()> {
    let truth = ws.load_truth()?;
    let mask = ws.load_mask()?;
    let y = simulate_acquisition(&truth, &mask, ws.cfg.noise_sigma, ws.cfg.noise_seed())?;
    let path = ws.out.join("kspace");
    save_kspace(&path, &y)?;
    ws.write_config("simulate")?;
    println!(
        "wrote {} k-space samples (sigma {}) to {}",
        y.samples().len(),
        ws.cfg.noise_sigma,
        path.with_extension("kbin").display()
    );
    Ok(())
}

pub fn reconstruct(ws: &Workspace) -> Result<()> {
    let method = ws.cfg.method();
    let y = ws.load_kspace()?;
    let params = ws.cfg.recon_params(method);
    let start = Instant::now();
    let rec = method.reconstruct(&y, &params)?;
    let elapsed = start.elapsed().as_secs_f64();
    let image = quantize_f32(&rec.image);
    save_mef(&ws.recon_path(method), &image)?;

    let mut resolved = ws.cfg.clone();
    resolved.params = Some(params);
    write_json(
        &ws.out.join(format!("config_reconstruct_{method}.json")),
        &resolved,
    )?;

    let truth_file = ws.truth_path().with_extension("json");
    if truth_file.exists() {
        let truth = ws.load_truth()?;
        let snr = snr_db(&truth, &image)?;
        let record = RunRecord {
            method: method.name().into(),
            config: serde_json::to_value(&resolved)?,
            snr_db: snr,
            snr_db_per_echo: snr_db_per_echo(&truth, &image)?,
            exact_match: snr.is_infinite(),
            cost_history: rec.cost_history.clone(),
            wall_clock_seconds: if ws.cfg.record_timing { elapsed } else { 0.0 },
            seed: ws.cfg.seed,
        };
        save_record(&ws.record_path(method), &record)?;
        println!(
            "{method}: SNR {snr:.2} dB after {} iterations ({elapsed:.1} s)",
            rec.cost_history.len().saturating_sub(1)
        );
    } else {
        println!("{method}: reconstructed in {elapsed:.1} s (no ground truth for SNR)");
    }
    Ok(())
}

#[derive(Serialize)]
struct EvalRow {
    method: String,
    #[serde(with = "snr_serde")]
    snr_db: f64,
    #[serde(with = "snr_serde::vec")]
    snr_db_per_echo: Vec<f64>,
}

#[derive(Serialize)]
struct Evaluation {
    lines_per_echo: usize,
    height: usize,
    rows: Vec<EvalRow>,
}

pub fn evaluate(ws: &Workspace) -> Result<()> {
    let truth = ws.load_truth()?;
    let mask = ws.load_mask()?;
    let mut rows = Vec::new();
    for m in Method::ALL {
        let p = ws.recon_path(m);
        if !p.with_extension("json").exists() {
            continue;
        }
        let rec = load_mef(&p)?;
        rows.push(EvalRow {
            method: m.name().into(),
            snr_db: snr_db(&truth, &rec)?,
            snr_db_per_echo: snr_db_per_echo(&truth, &rec)?,
        });
    }
    if rows.is_empty() {
        bail!(
            "no reconstructions found in {} (run `reconstruct` first)",
            ws.out.display()
        );
    }
    let lines = mask.echo_lines(0).len();
    let header = format!("{lines} lines");
    println!("{:<32}{:>12}", "Recovery Method", header);
    for r in &rows {
        let method: Method = r.method.parse()?;
        println!("{:<32}{:>12}", method.label(), format_snr(r.snr_db));
    }
    write_json(
        &ws.out.join("evaluation.json"),
        &Evaluation {
            lines_per_echo: lines,
            height: mask.height(),
            rows,
        },
    )?;
    ws.write_config("evaluate")?;
    Ok(())
}

fn format_snr(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.2}")
    }
}

pub fn export(ws: &Workspace) -> Result<()> {
    let truth = ws.load_truth()?;
    let (h, w, c) = truth.shape();
    let echoes = ws.cfg.export_echoes(c);
    if let Some(&bad) = echoes.iter().find(|&&e| e == 0 || e > c) {
        bail!("export echo {bad} outside 1..={c}");
    }
    let dir = ws.out.join("export");
    let mut written = 0;
    for &e in &echoes {
        let plane = truth.echo(e - 1);
        let peak = plane.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak == 0.0 {
            bail!("ground-truth echo {e} is all zero");
        }
        export_pgm(
            &dir.join(format!("truth_echo{e:02}.pgm")),
            plane,
            h,
            w,
            peak,
        )?;
        written += 1;
        for m in Method::ALL {
            let p = ws.recon_path(m);
            if !p.with_extension("json").exists() {
                continue;
            }
            let rec = load_mef(&p)?;
            if rec.shape() != truth.shape() {
                bail!("{} does not match the ground-truth shape", p.display());
            }
            let rp = rec.echo(e - 1);
            export_pgm(&dir.join(format!("{m}_echo{e:02}.pgm")), rp, h, w, peak)?;
            export_difference(
                &dir.join(format!("{m}_diff_echo{e:02}.pgm")),
                plane,
                rp,
                h,
                w,
            )?;
            written += 2;
        }
    }
    ws.write_config("export")?;
    println!(
        "wrote {written} PGM images for echoes {echoes:?} to {}",
        dir.display()
    );
    Ok(())
}

pub fn sweep(ws: &Workspace) -> Result<()> {
    let method = ws.cfg.method();
    if method.tunable().is_empty() {
        bail!("{method} has no parameters to tune");
    }
    let y = ws.load_kspace()?;
    let base = ws.cfg.recon_params(method);
    let outcome = lcurve_greedy(&y, method, &ws.cfg.grid, &base)?;
    for t in &outcome.traces {
        println!(
            "{method}: {} = {} (index {} of {:?})",
            t.parameter, t.values[t.selected], t.selected, t.values
        );
    }
    let path = ws.out.join(format!("sweep_{method}.json"));
    write_json(&path, &outcome)?;
    ws.write_config(&format!("sweep_{method}"))?;
    println!("wrote selected parameters to {}", path.display());
    Ok(())
}

pub fn ensure_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}
