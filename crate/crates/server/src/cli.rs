//! The `ugi` command line.

use std::fs::File;
use std::io::{BufRead, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};

use ugi_core::citymap::CityMap;
use ugi_core::flows::Rate;
use ugi_core::ingest::{load_map_file, save_map};
use ugi_core::kernel::{write_ndjson, Engine, EngineConfig};
use ugi_core::kg::{build_kg, KgConfig};
use ugi_core::model::MapBundle;
use ugi_core::popgen::{generate_population, install_population, PopGenConfig};
use ugi_core::synthetic::{grid_city, GridSpec};
use ugi_core::Error;

use crate::state::{ServeConfig, Shared};
use crate::wire::{NlBody, TimeSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "ugi", version, about = "City simulator: maps, populations, knowledge graph, headless runs and the API server")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and validate a map file.
    Validate { map: PathBuf },
    /// Generate a population and write the map with persons included.
    Genpop {
        map: PathBuf,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        days: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the knowledge graph and write it as `head relation tail` lines.
    Kg {
        map: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run headless and print a summary.
    Run {
        map: PathBuf,
        #[arg(long, default_value_t = 3600)]
        steps: u64,
        /// Seed for the generated population (only with --persons).
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Replace the map's persons with this many generated ones.
        #[arg(long)]
        persons: Option<usize>,
        /// Start time as seconds or HH:MM.
        #[arg(long, default_value = "0")]
        start: String,
        #[arg(long, default_value_t = 0.0)]
        tax: f64,
        #[arg(long, default_value_t = 0.0)]
        interest: f64,
        #[arg(long)]
        stats_out: Option<PathBuf>,
    },
    /// Serve the HTTP API. UGI_PORT, when set, overrides --port.
    Serve {
        map: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        persons: Option<usize>,
        #[arg(long, default_value = "0")]
        start: String,
        /// Advance without acks while no client is registered.
        #[arg(long)]
        free_run: bool,
        /// Free-run pace in steps per second; 0 is unthrottled.
        #[arg(long, default_value_t = 0.0)]
        rate: f64,
        #[arg(long)]
        until: Option<u64>,
    },
    /// Send one sentence per input line to a running server.
    Repl {
        #[arg(long, default_value = "http://127.0.0.1:8080")]
        url: String,
    },
    /// Write a synthetic grid city.
    Synth {
        #[arg(long, default_value_t = 4)]
        size: usize,
        #[arg(long, default_value_t = 200.0)]
        spacing: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_) | Error::Schema(_) => EXIT_INPUT,
        _ => EXIT_RUNTIME,
    }
}

fn report(e: &Error) -> i32 {
    eprintln!("error: {}: {e}", e.code());
    if let Error::Schema(r) = e {
        for issue in r.errors() {
            eprintln!("  {issue}");
        }
    }
    exit_code(e)
}

fn start_time(s: &str) -> Result<i64, Error> {
    let spec = match s.parse::<i64>() {
        Ok(n) => TimeSpec::Seconds(n),
        Err(_) => TimeSpec::Clock(s.to_string()),
    };
    spec.resolve(0).map_err(|e| Error::Parse(e.message))
}

fn with_population(mut bundle: MapBundle, persons: Option<usize>, seed: u64) -> Result<MapBundle, Error> {
    if let Some(n) = persons {
        let cfg = PopGenConfig { n_persons: n, seed, ..Default::default() };
        let people = generate_population(&bundle, &cfg)?;
        install_population(&mut bundle, people, cfg.days);
    }
    Ok(bundle)
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text)?;
    Ok(())
}

pub fn run(cli: Cli) -> i32 {
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => report(&e),
    }
}

fn dispatch(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Validate { map } => {
            let b = load_map_file(&map)?;
            println!(
                "ok: {} roads, {} junctions, {} AOIs, {} POIs, {} persons",
                b.roads.len(),
                b.junctions.len(),
                b.aois.len(),
                b.pois.len(),
                b.persons.len()
            );
        }
        Command::Genpop { map, n, seed, days, out } => {
            let mut b = load_map_file(&map)?;
            let cfg = PopGenConfig { n_persons: n, seed, days, ..Default::default() };
            let people = generate_population(&b, &cfg)?;
            let count = people.len();
            install_population(&mut b, people, days);
            write_text(&out, &save_map(&b))?;
            println!("wrote {count} persons to {}", out.display());
        }
        Command::Kg { map, out } => {
            let b = load_map_file(&map)?;
            let kg = build_kg(&b, None, &KgConfig::default());
            match out {
                Some(p) => {
                    write_text(&p, &kg.export())?;
                    println!("wrote {} triples to {}", kg.len(), p.display());
                }
                None => print!("{}", kg.export()),
            }
        }
        Command::Run { map, steps, seed, persons, start, tax, interest, stats_out } => {
            let b = with_population(load_map_file(&map)?, persons, seed)?;
            let config = EngineConfig {
                start_time: start_time(&start)?,
                tax_rate: Rate::from_f64(tax)?,
                interest_rate: Rate::from_f64(interest)?,
                record_stats: stats_out.is_some(),
                ..Default::default()
            };
            let mut engine = Engine::from_bundle(b, config)?;
            let mut sink = stats_out.as_ref().map(File::create).transpose()?.map(BufWriter::new);
            while engine.step() < steps {
                engine.advance();
                if let Some(w) = sink.as_mut() {
                    if engine.step() % 600 == 0 || engine.step() == steps {
                        write_ndjson(&mut *w, &engine.take_stats())?;
                    }
                }
            }
            if let Some(mut w) = sink {
                write_ndjson(&mut w, &engine.take_stats())?;
                w.flush()?;
            }
            let summary = serde_json::to_string_pretty(&engine.summary()).expect("summary serializes");
            println!("{summary}");
        }
        Command::Serve { map, port, host, seed, persons, start, free_run, rate, until } => {
            let port = match std::env::var("UGI_PORT") {
                Ok(v) => v.parse().map_err(|_| Error::BadConfig(format!("UGI_PORT={v} is not a port")))?,
                Err(_) => port,
            };
            let addr: SocketAddr = format!("{host}:{port}")
                .parse()
                .map_err(|_| Error::BadConfig(format!("bad listen address {host}:{port}")))?;
            let b = with_population(load_map_file(&map)?, persons, seed)?;
            let kg = build_kg(&b, None, &KgConfig::default());
            let persons = b.persons.clone();
            let config = EngineConfig { start_time: start_time(&start)?, ..Default::default() };
            let engine = Engine::new(Arc::new(CityMap::new(b)), &persons, config)?;
            let serve_cfg = ServeConfig {
                free_run,
                steps_per_second: rate,
                until_step: until,
                ..Default::default()
            };
            let shared = Shared::new(engine, kg, serve_cfg);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                tracing::info!("listening on {}", listener.local_addr()?);
                eprintln!("listening on http://{}", listener.local_addr()?);
                crate::serve(listener, shared, async {
                    let _ = tokio::signal::ctrl_c().await;
                })
                .await
            })?;
        }
        Command::Repl { url } => {
            let stdin = std::io::stdin();
            let mut stdout = std::io::stdout();
            repl(&url, stdin.lock(), &mut stdout)?;
        }
        Command::Synth { size, spacing, out } => {
            let b = grid_city(&GridSpec { size, spacing, ..Default::default() });
            write_text(&out, &save_map(&b))?;
            println!("wrote {size}x{size} grid to {}", out.display());
        }
    }
    Ok(())
}

/// One request per non-blank input line; prints the response text.
pub fn repl<R: BufRead, W: Write>(url: &str, input: R, out: &mut W) -> Result<(), Error> {
    let client = reqwest::blocking::Client::new();
    let endpoint = format!("{}/nl", url.trim_end_matches('/'));
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply: NlBody = client
            .post(&endpoint)
            .json(&NlBody { text: line })
            .send()
            .and_then(|r| r.json())
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        writeln!(out, "{}", reply.text)?;
    }
    Ok(())
}
