//! Command-line front end: classify, shuffle, span, transform and solve games
//! stored as JSON documents.
//!
//! Exit codes: 0 success, 1 usage or parse error, 2 negative answer (no
//! witness, not a span), 3 size guard exceeded.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use recall_forge::format::{parse_certificate, parse_game, serialize_certificate, serialize_game};
use recall_forge::generators::{
    gen_lowerbound, gen_pennies, gen_random, lowerbound_game, FamilyParams, PenniesVariant,
};
use recall_forge::model::{Game, Player};
use recall_forge::rational::format_rational;
use recall_forge::seqsets::{extract_histories, SequenceSet};
use recall_forge::shuffle::salr_witness;
use recall_forge::solver::{solve, SolveError, SolveMethod};
use recall_forge::span::{check_certificate, minimal_span, shuffle_depth, verify_span, SpanCertificate, SpanError};
use recall_forge::transform::{compose_two_player, transfer_payoffs};

#[derive(Parser)]
#[command(name = "recall-forge", version, about = "Turn imperfect-recall games into A-loss recall games and solve them exactly")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print each player's recall class.
    Classify { file: Option<PathBuf> },
    /// Reorder histories into an A-loss recall game, if possible.
    Shuffle {
        file: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print the minimal A-loss recall span, one sequence per line.
    Span {
        file: Option<PathBuf>,
        /// Write the span game with transferred payoffs here.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Write the span certificate here.
        #[arg(long)]
        certificate: Option<PathBuf>,
        /// Span one player's projected histories instead of the full ones.
        #[arg(long, value_enum)]
        player: Option<PlayerArg>,
    },
    /// Print the shuffle depth.
    Sd { file: Option<PathBuf> },
    /// Replay a span certificate and write the transformed game.
    Transform {
        file: Option<PathBuf>,
        #[arg(long)]
        certificate: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print the maxmin value and an optimal pure strategy.
    Solve {
        file: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
        method: MethodArg,
    },
    /// Combine per-player span certificates into one two-player game.
    Compose {
        file: Option<PathBuf>,
        #[arg(long)]
        max_cert: PathBuf,
        #[arg(long)]
        min_cert: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check that CAND's leaf histories span ORIG's and print the certificate.
    VerifySpan { original: PathBuf, candidate: PathBuf },
    /// Generate a game document.
    Gen {
        #[command(subcommand)]
        family: GenFamily,
    },
    /// Time minimal spans over a family and print CSV.
    Bench {
        #[arg(long, value_enum)]
        family: BenchFamily,
        #[arg(long)]
        n_max: usize,
    },
}

#[derive(Subcommand)]
enum GenFamily {
    Pennies {
        #[arg(long)]
        variant: PenniesVariant,
        #[arg(long)]
        n: usize,
    },
    Lowerbound {
        #[arg(long)]
        n: usize,
    },
    Random {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        depth: usize,
        #[arg(long, default_value_t = 2)]
        branching: usize,
        /// Percent chance of joining an existing infoset.
        #[arg(long, default_value_t = 50)]
        merge: u32,
        #[arg(long, default_value_t = 30)]
        chance: u32,
        #[arg(long, default_value_t = 20)]
        leaf: u32,
        #[arg(long)]
        two_player: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Auto,
    Bruteforce,
    Span,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlayerArg {
    Max,
    Min,
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchFamily {
    Lowerbound,
    PenniesIii,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }

    fn negative(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

fn fail(e: impl std::fmt::Display) -> Failure {
    Failure::usage(e.to_string())
}

fn span_failure(e: SpanError) -> Failure {
    match e {
        SpanError::TooLarge(_) => Failure {
            code: 3,
            message: e.to_string(),
        },
        SpanError::NotAlr(_) | SpanError::Unverified(_) => Failure::negative(e.to_string()),
        _ => fail(e),
    }
}

type Outcome = Result<(), Failure>;

fn read_text(path: Option<&Path>) -> Result<String, Failure> {
    match path {
        None => {
            let mut s = String::new();
            io::stdin()
                .read_to_string(&mut s)
                .map_err(|e| Failure::usage(format!("stdin: {e}")))?;
            Ok(s)
        }
        Some(p) if p == Path::new("-") => read_text(None),
        Some(p) => fs::read_to_string(p).map_err(|e| Failure::usage(format!("{}: {e}", p.display()))),
    }
}

fn load_game(path: Option<&Path>) -> Result<Game, Failure> {
    let name = path.map_or("<stdin>".to_string(), |p| p.display().to_string());
    parse_game(&read_text(path)?).map_err(|e| Failure::usage(format!("{name}: {e}")))
}

fn emit(path: Option<&Path>, text: &str) -> Outcome {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::usage(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn histories(game: &Game, player: Option<Player>) -> Result<SequenceSet, Failure> {
    extract_histories(game.structure(), player).map_err(fail)
}

/// Parses a certificate and checks every combination in it.
fn load_certificate(path: &Path, game: &Game) -> Result<SpanCertificate, Failure> {
    let text = read_text(Some(path))?;
    let cert = parse_certificate(&text, game.structure().alphabet())
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    if check_certificate(&cert).map_err(span_failure)? {
        Ok(cert)
    } else {
        Err(Failure::negative(format!(
            "{}: some combination does not generate its sequence",
            path.display()
        )))
    }
}

fn sequence_lines(set: &SequenceSet) -> String {
    set.iter()
        .map(|s| s.display(set.alphabet()) + "\n")
        .collect()
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Classify { file } => {
            let game = load_game(file.as_deref())?;
            let s = game.structure();
            let mut players: Vec<Player> = s.infosets().iter().map(|i| i.owner).collect();
            players.sort();
            players.dedup();
            if players.is_empty() {
                players.push(Player::Max);
            }
            for p in players {
                println!("{}: {}", p.tag(), s.classify_recall(p).map_err(fail)?.name());
            }
            Ok(())
        }
        Command::Shuffle { file, output } => {
            let game = load_game(file.as_deref())?;
            let h = histories(&game, None)?;
            let result = salr_witness(&h);
            let Some(witness) = result.witness else {
                let reason = match result.failure {
                    Some(f) if f.covering_infosets().is_empty() => {
                        format!("{} is connected and no infoset touches all of it", f.display())
                    }
                    Some(f) => format!("{} use the same actions", f.display()),
                    None => String::new(),
                };
                return Err(Failure::negative(format!("no s-alr: {reason}")));
            };
            let cert = verify_span(&h, &witness)
                .map_err(span_failure)?
                .ok_or_else(|| Failure::negative("witness does not verify"))?;
            let shuffled = transfer_payoffs(&game, &cert).map_err(fail)?;
            emit(output.as_deref(), &serialize_game(&shuffled.game))
        }
        Command::Span {
            file,
            output,
            certificate,
            player,
        } => {
            let player = player.map(|p| match p {
                PlayerArg::Max => Player::Max,
                PlayerArg::Min => Player::Min,
            });
            if player.is_some() && output.is_some() {
                return Err(Failure::usage(
                    "--output needs the full histories; use compose for per-player spans",
                ));
            }
            let game = load_game(file.as_deref())?;
            let cert = minimal_span(&histories(&game, player)?).map_err(span_failure)?;
            if let Some(path) = certificate.as_deref() {
                emit(Some(path), &serialize_certificate(&cert))?;
            }
            if let Some(path) = output.as_deref() {
                let t = transfer_payoffs(&game, &cert).map_err(fail)?;
                emit(Some(path), &serialize_game(&t.game))?;
            }
            print!("{}", sequence_lines(&cert.span));
            Ok(())
        }
        Command::Sd { file } => {
            let game = load_game(file.as_deref())?;
            println!("{}", shuffle_depth(&histories(&game, None)?));
            Ok(())
        }
        Command::Transform {
            file,
            certificate,
            output,
        } => {
            let game = load_game(file.as_deref())?;
            let cert = load_certificate(&certificate, &game)?;
            let t = transfer_payoffs(&game, &cert).map_err(fail)?;
            emit(output.as_deref(), &serialize_game(&t.game))
        }
        Command::Solve { file, method } => {
            let game = load_game(file.as_deref())?;
            let method = match method {
                MethodArg::Auto => SolveMethod::Auto,
                MethodArg::Bruteforce => SolveMethod::Bruteforce,
                MethodArg::Span => SolveMethod::Span,
            };
            let r = solve(&game, method).map_err(|e| match e {
                SolveError::TooManyStrategies { .. } => Failure {
                    code: 3,
                    message: e.to_string(),
                },
                other => fail(other),
            })?;
            println!("{}", format_rational(&r.value));
            for line in r.strategy.lines(game.structure().alphabet()) {
                println!("{line}");
            }
            Ok(())
        }
        Command::Compose {
            file,
            max_cert,
            min_cert,
            output,
        } => {
            let game = load_game(file.as_deref())?;
            let cmax = load_certificate(&max_cert, &game)?;
            let cmin = load_certificate(&min_cert, &game)?;
            let t = compose_two_player(&game, &cmax, &cmin).map_err(fail)?;
            emit(output.as_deref(), &serialize_game(&t.game))
        }
        Command::VerifySpan {
            original,
            candidate,
        } => {
            let orig = load_game(Some(&original))?;
            let cand = load_game(Some(&candidate))?;
            if !orig
                .structure()
                .alphabet()
                .same_as(cand.structure().alphabet())
            {
                return Err(Failure::usage("the two documents declare different infosets"));
            }
            let h = histories(&orig, None)?;
            let c = extract_histories(cand.structure(), None).map_err(fail)?;
            let c = SequenceSet::new(h.alphabet().clone(), c.iter().cloned()).map_err(fail)?;
            match verify_span(&h, &c).map_err(span_failure)? {
                Some(cert) => emit(None, &serialize_certificate(&cert)),
                None => Err(Failure::negative("not a span: some original sequence is not generated")),
            }
        }
        Command::Gen { family } => {
            let game = match family {
                GenFamily::Pennies { variant, n } => gen_pennies(variant, n),
                GenFamily::Lowerbound { n } => lowerbound_game(n),
                GenFamily::Random {
                    seed,
                    depth,
                    branching,
                    merge,
                    chance,
                    leaf,
                    two_player,
                } => {
                    let mut p = FamilyParams::random(seed);
                    p.depth = depth;
                    p.branching = branching;
                    p.merge_percent = merge;
                    p.chance_percent = chance;
                    p.leaf_percent = leaf;
                    p.two_player = two_player;
                    gen_random(&p)
                }
            }
            .map_err(fail)?;
            emit(None, &serialize_game(&game))
        }
        Command::Bench { family, n_max } => {
            let mut out = io::stdout().lock();
            let io_err = |e: io::Error| Failure::usage(e.to_string());
            writeln!(out, "n,span_size,wall_ms").map_err(io_err)?;
            for n in 1..=n_max {
                let set = match family {
                    BenchFamily::Lowerbound => gen_lowerbound(n).map_err(fail)?,
                    BenchFamily::PenniesIii => {
                        let game = gen_pennies(PenniesVariant::III, n).map_err(fail)?;
                        histories(&game, None)?
                    }
                };
                let start = Instant::now();
                let cert = minimal_span(&set).map_err(span_failure)?;
                let ms = start.elapsed().as_secs_f64() * 1000.0;
                writeln!(out, "{n},{},{ms:.3}", cert.span.len()).map_err(io_err)?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
