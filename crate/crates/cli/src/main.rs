//! `ptpmdl`: block-parallel context-tree compression of arbitrary files,
//! treated as raw bit streams.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use ptpmdl::bitio::Bits;
use ptpmdl::codec::{compress, decompress, CompressOptions};
use ptpmdl::container::Container;
use ptpmdl::quant::Scheme;
use ptpmdl_cli::{bench, inspect, source::SourceSpec};
use std::fs::File;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "ptpmdl", version, about = "Block-parallel context-tree compressor")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compress a file into a self-contained container
    Compress {
        input: PathBuf,
        output: PathBuf,
        /// Number of independently decodable blocks
        #[arg(long, default_value_t = 1)]
        blocks: u32,
        /// Context depth in bits; chosen from the block length when omitted
        #[arg(long)]
        depth: Option<u8>,
        /// Parameter quantization scheme: 0 global, 1 scaled, 2 two-level
        #[arg(long, default_value_t = 0)]
        scheme: u8,
        /// Population threshold separating coarse from fine states (scheme 2)
        #[arg(long)]
        tau: Option<u64>,
    },
    /// Decompress a container, or a single block of one
    Decompress {
        input: PathBuf,
        output: PathBuf,
        /// Extract only this block (1-based); the output may carry
        /// zero padding in its final byte
        #[arg(long)]
        block: Option<u64>,
    },
    /// Describe a container's model and layout
    Inspect { input: PathBuf },
    /// Sample a synthetic tree source into a file
    Gen {
        /// Text file with one `<suffix> <p1>` state per line
        #[arg(long)]
        spec: PathBuf,
        /// Number of bits to draw; the file holds ceil(n/8) bytes
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compress a grid of files, block counts, and schemes into a CSV report
    Bench {
        #[arg(long, required = true, num_args = 1..)]
        files: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "1,10,100,1000")]
        blocks: Vec<u32>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        schemes: Vec<u8>,
        /// Parallelization efficiency assumed by the throughput projection
        #[arg(long, default_value_t = 0.2)]
        eta: f64,
        #[arg(long)]
        csv: PathBuf,
        /// Fixed context depth for every run
        #[arg(long)]
        depth: Option<u8>,
    },
}

fn parse_scheme(v: u8) -> Result<Scheme> {
    Scheme::from_u8(v).with_context(|| format!("scheme must be 0, 1, or 2, got {v}"))
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Compress {
            input,
            output,
            blocks,
            depth,
            scheme,
            tau,
        } => {
            let bytes =
                std::fs::read(&input).with_context(|| format!("reading {}", input.display()))?;
            if bytes.is_empty() {
                bail!("{} is empty", input.display());
            }
            let in_bytes = bytes.len();
            let bits = Bits::from_bytes(bytes);
            let opts = CompressOptions {
                blocks,
                depth,
                scheme: parse_scheme(scheme)?,
                tau,
                parallel: true,
            };
            let out = compress(&bits, &opts)?;
            let serialized = out.container.serialize();
            std::fs::write(&output, &serialized)
                .with_context(|| format!("writing {}", output.display()))?;
            println!(
                "{} -> {}: {} -> {} bytes, {:.4} bits/byte, {} states, depth {}",
                input.display(),
                output.display(),
                in_bytes,
                serialized.len(),
                serialized.len() as f64 * 8.0 / in_bytes as f64,
                out.stats.state_count,
                out.container.depth,
            );
        }
        Cmd::Decompress {
            input,
            output,
            block,
        } => {
            let bits = match block {
                Some(0) => bail!("blocks are numbered from 1"),
                Some(b) => {
                    let file = File::open(&input)
                        .with_context(|| format!("opening {}", input.display()))?;
                    let mut dec = ptpmdl::BlockDecoder::open(file)?;
                    if b > dec.block_count() as u64 {
                        bail!("container has {} blocks, asked for {b}", dec.block_count());
                    }
                    dec.block(b as u32 - 1)?
                }
                None => {
                    let bytes = std::fs::read(&input)
                        .with_context(|| format!("reading {}", input.display()))?;
                    decompress(&Container::parse(&bytes)?)?
                }
            };
            let n_bits = bits.len();
            let bytes = bits.into_bytes();
            std::fs::write(&output, &bytes)
                .with_context(|| format!("writing {}", output.display()))?;
            println!("{} bits -> {} ({} bytes)", n_bits, output.display(), bytes.len());
        }
        Cmd::Inspect { input } => {
            let bytes =
                std::fs::read(&input).with_context(|| format!("reading {}", input.display()))?;
            print!("{}", inspect::report(&bytes)?);
        }
        Cmd::Gen { spec, n, seed, out } => {
            let spec = SourceSpec::load(&spec)?;
            if n == 0 {
                bail!("n must be at least 1");
            }
            let bits = spec.generate(n, seed);
            let bytes = bits.into_bytes();
            std::fs::write(&out, &bytes).with_context(|| format!("writing {}", out.display()))?;
            println!("{n} bits -> {} ({} bytes)", out.display(), bytes.len());
        }
        Cmd::Bench {
            files,
            blocks,
            schemes,
            eta,
            csv,
            depth,
        } => {
            if !(eta > 0.0 && eta <= 1.0) {
                bail!("eta must lie in (0, 1]");
            }
            let schemes = schemes
                .into_iter()
                .map(parse_scheme)
                .collect::<Result<Vec<_>>>()?;
            if blocks.iter().any(|&b| b == 0) {
                bail!("block counts must be at least 1");
            }
            let mut failures = 0u32;
            let rows = bench::run_grid(&files, &blocks, &schemes, eta, depth, |path, err| {
                failures += 1;
                eprintln!("{}: {err:#}", path.display());
            })?;
            std::fs::write(&csv, bench::to_csv(&rows))
                .with_context(|| format!("writing {}", csv.display()))?;
            println!("{}", bench::CSV_HEADER);
            for r in &rows {
                println!(
                    "{},{},{},{},{:.4},{:.1},{},{},{},{},{:.3},{:.3},{:.2}",
                    r.file,
                    r.n_bits,
                    r.blocks,
                    r.scheme,
                    r.gamma,
                    r.rho,
                    r.model_bits,
                    r.param_bits,
                    r.raw_bits,
                    r.payload_bits,
                    r.ts_ms,
                    r.tsp_ms,
                    r.mu_mbps
                );
            }
            if rows.is_empty() {
                bail!("no benchmark rows produced ({failures} failures)");
            }
            eprintln!("wrote {} rows to {}", rows.len(), csv.display());
        }
    }
    Ok(())
}
