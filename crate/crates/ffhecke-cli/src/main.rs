//! Command-line front end: JSON I/O around the library, certification
//! sweeps, and polygon rendering.
//!
//! Exit codes: 0 on success (including "none"/"zero" answers), 1 on a
//! negative verdict (failed certification, rejected trace, vanishing probed
//! stalk, sweep failures), 2 on usage errors.

mod render;

use clap::{Args, Parser, Subcommand};
use ffhecke::certifier::{certify, check_trace, Budget, Claim, DerivationNode, Verdict};
use ffhecke::hecke::{stalk, stalk_probe, CategoryLabel, ParameterDatum};
use ffhecke::levi::{b_of_chi, in_bgl, Character, LeviDatum};
use ffhecke::modifications::{classify_reducibility, reach_over, std_mod_evidence};
use ffhecke::slope::Bundle;
use rayon::prelude::*;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "ffhecke",
    about = "Exact slope combinatorics: bundles from characters, modification \
             reachability, two-block reducibility, stalk bookkeeping, and \
             machine-checkable certification traces.",
    arg_required_else_help = true
)]
struct Cli {
    /// Emit machine-readable JSON on stdout instead of human-readable text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct LeviChi {
    /// Comma-separated block ranks, e.g. `2,3,3`.
    #[arg(long, value_parser = parse_levi)]
    levi: LeviDatum,
    /// Comma-separated character entries, e.g. `2,2,1`.
    #[arg(long, value_parser = parse_chi, allow_hyphen_values = true)]
    chi: Character,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the bundle attached to a character, with its sorting
    /// permutation and the characters matching the result.
    Chi2b(LeviChi),
    /// Enumerate all candidate targets of one elementary modification step.
    Reach {
        /// Source bundle as JSON, e.g. `{"pieces":[{"slope":{"num":1,"den":2},"rank":2}]}`.
        #[arg(long, value_parser = parse_bundle)]
        bundle: Bundle,
    },
    /// Classify a modification pair as a two-block reduction (or "none").
    Classify {
        #[arg(long, value_parser = parse_bundle)]
        from: Bundle,
        #[arg(long, value_parser = parse_bundle)]
        to: Bundle,
    },
    /// Compute the stalk of the composite elementary operator for a
    /// character, optionally probed at one target bundle.
    Stalk {
        #[command(flatten)]
        inst: LeviChi,
        /// Source category label as JSON (defaults to the trivial label).
        #[arg(long, value_parser = parse_label)]
        source: Option<CategoryLabel>,
        /// Probe bundle: exit 1 if the stalk vanishes there.
        #[arg(long, value_parser = parse_bundle)]
        probe: Option<Bundle>,
    },
    /// Certify the case analysis for one instance and optionally emit the
    /// derivation trace.
    Certify {
        #[command(flatten)]
        inst: LeviChi,
        /// Write the derivation trace as JSON to this path.
        #[arg(long)]
        emit: Option<std::path::PathBuf>,
    },
    /// Re-verify a derivation trace emitted by `certify`.
    Check {
        /// Path to a trace JSON file.
        trace: std::path::PathBuf,
    },
    /// Certify every composition of every rank up to --max-n against every
    /// non-negative character of total up to --max-chi.
    Sweep {
        #[arg(long, default_value_t = 8)]
        max_n: u32,
        #[arg(long, default_value_t = 4)]
        max_chi: i64,
        /// Certify claims concurrently (output stays deterministic).
        #[arg(long)]
        parallel: bool,
    },
    /// Render Newton polygons as SVG or ASCII.
    Render {
        /// Main bundle as JSON.
        #[arg(long, value_parser = parse_bundle)]
        bundle: Bundle,
        /// Additional overlaid bundles as JSON.
        #[arg(long, value_parser = parse_bundle)]
        overlay: Vec<Bundle>,
        #[arg(long, default_value = "svg", value_parser = ["svg", "ascii"])]
        format: String,
        /// Highlight the minimal-slope segment of the main polygon.
        #[arg(long)]
        mark_min: bool,
    },
}

fn parse_levi(s: &str) -> Result<LeviDatum, String> {
    let parts: Vec<u32> = s
        .split(',')
        .map(|t| t.trim().parse::<u32>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    LeviDatum::new(parts).map_err(|e| e.to_string())
}

fn parse_chi(s: &str) -> Result<Character, String> {
    let values: Vec<i64> = s
        .split(',')
        .map(|t| t.trim().parse::<i64>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    Ok(Character::new(values))
}

fn parse_bundle(s: &str) -> Result<Bundle, String> {
    serde_json::from_str(s).map_err(|e| e.to_string())
}

fn parse_label(s: &str) -> Result<CategoryLabel, String> {
    serde_json::from_str(s).map_err(|e| e.to_string())
}

fn budget_from_env() -> Result<Budget, String> {
    let mut budget = Budget::default();
    if let Ok(raw) = std::env::var("FFHECKE_BUDGET") {
        let cap: usize = raw
            .trim()
            .parse()
            .map_err(|e| format!("FFHECKE_BUDGET must be an integer: {e}"))?;
        budget.max_candidates = cap;
    }
    Ok(budget)
}

fn compositions(n: u32) -> Vec<Vec<u32>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for first in 1..=n {
        for rest in compositions(n - first) {
            let mut v = vec![first];
            v.extend(rest);
            out.push(v);
        }
    }
    out
}

fn nonneg_chars(r: usize, total: i64) -> Vec<Vec<i64>> {
    if r == 0 {
        return if total == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for v in 0..=total {
        for rest in nonneg_chars(r - 1, total - v) {
            let mut c = vec![v];
            c.extend(rest);
            out.push(c);
        }
    }
    out
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    let json = cli.json;
    match cli.command {
        Command::Chi2b(LeviChi { levi, chi }) => {
            let (bundle, w) = b_of_chi(&levi, &chi).map_err(|e| e.to_string())?;
            let matches = in_bgl(&levi, &bundle).map_err(|e| e.to_string())?;
            if json {
                let out = serde_json::json!({
                    "bundle": bundle,
                    "permutation": w.one_line_one_based(),
                    "matching_characters": matches
                        .iter()
                        .map(|c| c.values().to_vec())
                        .collect::<Vec<_>>(),
                });
                println!("{out}");
            } else {
                println!("bundle: {bundle}");
                println!("ascending-order permutation (one-line): {:?}", w.one_line_one_based());
                let listed: Vec<String> = matches.iter().map(|c| c.to_string()).collect();
                println!("matching characters: {}", listed.join(", "));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Reach { bundle } => {
            let targets = reach_over(&bundle);
            if json {
                println!("{}", serde_json::json!({ "source": bundle, "targets": targets }));
            } else {
                println!("source: {bundle}");
                println!("{} candidate target(s):", targets.len());
                for t in &targets {
                    println!("  {t}");
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Classify { from, to } => {
            let evidence = std_mod_evidence(&from, &to).map_err(|e| e.to_string())?;
            let datum = if evidence.is_some() {
                classify_reducibility(&from, &to).map_err(|e| e.to_string())?
            } else {
                None
            };
            if json {
                println!(
                    "{}",
                    serde_json::json!({
                        "modification_exists": evidence.is_some(),
                        "sandwich": evidence,
                        "reduction": datum,
                    })
                );
            } else if let Some(d) = &datum {
                println!(
                    "reducible: {:?} split GL_{} x GL_{}",
                    d.kind, d.m1, d.m2
                );
            } else if evidence.is_some() {
                println!("none (modification exists but is not reducible)");
            } else {
                println!("none (no modification)");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Stalk { inst, source, probe } => {
            let LeviChi { levi, chi } = inst;
            let phi = ParameterDatum::generic(levi.clone());
            let source = source.unwrap_or_else(|| ffhecke::hecke::trivial_label(&levi));
            let result = match &probe {
                Some(b) => stalk_probe(&phi, &chi, &source, b).map_err(|e| e.to_string())?,
                None => stalk(&phi, &chi, &source).map_err(|e| e.to_string())?,
            };
            if json {
                println!("{}", serde_json::to_string(&result).expect("serializable"));
            } else {
                match &result.target {
                    CategoryLabel::Zero => println!("stalk: zero"),
                    CategoryLabel::Label { bundle, .. } => {
                        println!("stalk target: {bundle}");
                        println!("equivalence: {}", result.is_equivalence);
                        println!("shift ledger: {}", result.shift_ledger);
                    }
                }
            }
            if probe.is_some() && result.target.is_zero() {
                return Ok(ExitCode::FAILURE);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Certify { inst, emit } => {
            let LeviChi { levi, chi } = inst;
            let budget = budget_from_env()?;
            let claim = Claim::new(levi, chi);
            match certify(&claim, &budget) {
                Verdict::Certified(node) => {
                    check_trace(&node).map_err(|e| format!("internal: emitted trace rejected: {e}"))?;
                    if let Some(path) = emit {
                        let text = serde_json::to_string_pretty(&*node).expect("serializable");
                        std::fs::write(&path, text).map_err(|e| e.to_string())?;
                    }
                    if json {
                        println!(
                            "{}",
                            serde_json::json!({
                                "verdict": "certified",
                                "nodes": node.walk().len(),
                            })
                        );
                    } else {
                        println!("certified ({} trace nodes)", node.walk().len());
                    }
                    Ok(ExitCode::SUCCESS)
                }
                Verdict::Failed { claim, reason } => {
                    if json {
                        println!(
                            "{}",
                            serde_json::json!({
                                "verdict": "failed",
                                "claim": claim,
                                "reason": reason,
                            })
                        );
                    } else {
                        println!("failed at {claim}: {reason}");
                    }
                    Ok(ExitCode::FAILURE)
                }
                Verdict::OutOfBudget => {
                    if json {
                        println!("{}", serde_json::json!({ "verdict": "out-of-budget" }));
                    } else {
                        println!("out of budget");
                    }
                    Ok(ExitCode::FAILURE)
                }
            }
        }
        Command::Check { trace } => {
            let text = std::fs::read_to_string(&trace).map_err(|e| e.to_string())?;
            let node: DerivationNode =
                serde_json::from_str(&text).map_err(|e| format!("malformed trace: {e}"))?;
            match check_trace(&node) {
                Ok(()) => {
                    if json {
                        println!("{}", serde_json::json!({ "verdict": "ok" }));
                    } else {
                        println!("trace verified ({} nodes)", node.walk().len());
                    }
                    Ok(ExitCode::SUCCESS)
                }
                Err(reason) => {
                    if json {
                        println!(
                            "{}",
                            serde_json::json!({ "verdict": "rejected", "reason": reason })
                        );
                    } else {
                        println!("trace rejected: {reason}");
                    }
                    Ok(ExitCode::FAILURE)
                }
            }
        }
        Command::Sweep {
            max_n,
            max_chi,
            parallel,
        } => {
            let budget = budget_from_env()?;
            let mut claims = Vec::new();
            for n in 1..=max_n {
                for parts in compositions(n) {
                    let levi = LeviDatum::new(parts).expect("parts positive");
                    for total in 0..=max_chi {
                        for cv in nonneg_chars(levi.num_parts(), total) {
                            claims.push(Claim::new(levi.clone(), Character::new(cv)));
                        }
                    }
                }
            }
            let verdict_of = |claim: &Claim| -> Option<String> {
                match certify(claim, &budget) {
                    Verdict::Certified(node) => {
                        check_trace(&node).err().map(|e| format!("{claim}: trace rejected: {e}"))
                    }
                    Verdict::Failed { claim: at, reason } => {
                        Some(format!("{claim}: failed at {at}: {reason}"))
                    }
                    Verdict::OutOfBudget => Some(format!("{claim}: out of budget")),
                }
            };
            let failures: Vec<String> = if parallel {
                claims.par_iter().filter_map(&verdict_of).collect()
            } else {
                claims.iter().filter_map(verdict_of).collect()
            };
            let certified = claims.len() - failures.len();
            if json {
                println!(
                    "{}",
                    serde_json::json!({ "certified": certified, "failed": failures })
                );
            } else {
                for f in &failures {
                    println!("FAIL {f}");
                }
                println!("certified: {certified}, failed: {}", failures.len());
            }
            if failures.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Render {
            bundle,
            overlay,
            format,
            mark_min,
        } => {
            let mut overlays = vec![render::Overlay {
                bundle,
                style: "main".into(),
            }];
            for (i, b) in overlay.into_iter().enumerate() {
                overlays.push(render::Overlay {
                    bundle: b,
                    style: format!("overlay-{}", i + 1),
                });
            }
            let spec = render::RenderSpec {
                format: if format == "svg" {
                    render::Format::Svg
                } else {
                    render::Format::Ascii
                },
                overlays,
                mark_min_slope: mark_min,
            };
            print!("{}", render::render(&spec));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
