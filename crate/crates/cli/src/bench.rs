//! Benchmark harness. Every run compresses serially so the two timing
//! sections are clean, verifies the roundtrip, and reports compression and
//! throughput figures. Parallel speed is not measured directly; it is
//! projected from the serial times by an efficiency-discounted Amdahl model,
//! the same way a B-way machine would be sized from a one-machine profile.

use anyhow::{ensure, Context, Result};
use ptpmdl::bitio::Bits;
use ptpmdl::codec::{compress, decompress, CompressOptions};
use ptpmdl::quant::Scheme;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// One benchmark measurement.
///
/// The bit columns split the coded content: `model_bits` is the whole model
/// segment, of which `param_bits` carry the quantized parameters and flags;
/// `raw_bits` are the uncoded context warm-ups at block starts and
/// `payload_bits` the arithmetic-coded remainder. `gamma` is compressed
/// output bits per input byte, container framing included. `rho` is content
/// bits in excess of the input's maximum-likelihood entropy under the
/// recovered model.
#[derive(Clone, Debug)]
pub struct BenchRow {
    pub file: String,
    pub n_bits: u64,
    pub blocks: u32,
    pub scheme: u8,
    pub gamma: f64,
    pub rho: f64,
    pub model_bits: u64,
    pub param_bits: u64,
    pub raw_bits: u64,
    pub payload_bits: u64,
    pub ts_ms: f64,
    pub tsp_ms: f64,
    pub mu_mbps: f64,
}

/// Estimated wall time for `blocks`-way execution: the serial section plus
/// the parallel section divided by the effective machine count `eta * B`.
pub fn t_est_secs(ts_secs: f64, tsp_secs: f64, eta: f64, blocks: u32) -> f64 {
    ts_secs + tsp_secs / (eta * blocks as f64)
}

pub fn throughput_mbps(n_bits: u64, t_est: f64) -> f64 {
    n_bits as f64 / t_est / 1e6
}

/// Compresses one prepared bit stream and fills a report row.
pub fn bench_bits(
    name: &str,
    input: &Bits,
    blocks: u32,
    scheme: Scheme,
    depth: Option<u8>,
    tau: Option<u64>,
    eta: f64,
) -> Result<BenchRow> {
    let opts = CompressOptions {
        blocks,
        depth,
        scheme,
        tau,
        parallel: false,
    };
    let out = compress(input, &opts).context("compress")?;
    ensure!(
        decompress(&out.container).context("decompress")? == *input,
        "roundtrip mismatch on {name}"
    );
    let serialize_t0 = Instant::now();
    let bytes = out.container.serialize();
    let serialize_nanos = serialize_t0.elapsed().as_nanos() as u64;

    let stats = &out.stats;
    let ts_secs = (stats.ts_nanos + serialize_nanos) as f64 / 1e9;
    let tsp_secs = stats.tsp_nanos as f64 / 1e9;
    let input_bytes = input.len() as f64 / 8.0;
    Ok(BenchRow {
        file: name.to_string(),
        n_bits: input.len(),
        blocks,
        scheme: scheme.as_u8(),
        gamma: bytes.len() as f64 * 8.0 / input_bytes,
        rho: stats.redundancy_bits(),
        model_bits: stats.model_len_bits,
        param_bits: stats.model_len_bits - stats.natural_bits,
        raw_bits: stats.total_raw_bits(),
        payload_bits: stats.total_payload_bits() - stats.total_raw_bits(),
        ts_ms: ts_secs * 1e3,
        tsp_ms: tsp_secs * 1e3,
        mu_mbps: throughput_mbps(input.len(), t_est_secs(ts_secs, tsp_secs, eta, blocks)),
    })
}

/// Runs the full grid of files, block counts, and schemes. A file that
/// cannot be read is reported once and skipped; other files still run.
pub fn run_grid(
    files: &[PathBuf],
    blocks: &[u32],
    schemes: &[Scheme],
    eta: f64,
    depth: Option<u8>,
    mut report_error: impl FnMut(&Path, &anyhow::Error),
) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for path in files {
        let input = match std::fs::read(path)
            .with_context(|| format!("reading {}", path.display()))
        {
            Ok(bytes) if bytes.is_empty() => {
                report_error(path, &anyhow::anyhow!("file is empty"));
                continue;
            }
            Ok(bytes) => Bits::from_bytes(bytes),
            Err(e) => {
                report_error(path, &e);
                continue;
            }
        };
        let name = path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        for &b in blocks {
            for &scheme in schemes {
                match bench_bits(&name, &input, b, scheme, depth, None, eta) {
                    Ok(row) => rows.push(row),
                    Err(e) => report_error(path, &e),
                }
            }
        }
    }
    Ok(rows)
}

pub const CSV_HEADER: &str =
    "file,N,B,scheme,gamma,rho,model_bits,param_bits,raw_bits,payload_bits,ts_ms,tsp_ms,mu_mbps";

pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
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
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn projected_throughput_rises_concavely_toward_the_serial_ceiling() {
        let (n, ts, tsp, eta) = (1u64 << 20, 0.002, 0.040, 0.2);
        let mu: Vec<f64> = (1u32..=512)
            .map(|b| throughput_mbps(n, t_est_secs(ts, tsp, eta, b)))
            .collect();
        for w in mu.windows(2) {
            assert!(w[1] > w[0], "throughput must grow with machine count");
        }
        for w in mu.windows(3) {
            assert!(w[2] - w[1] < w[1] - w[0], "per-machine gains must taper off");
        }
        let ceiling = throughput_mbps(n, ts);
        assert!(mu.iter().all(|&m| m < ceiling));
        assert!(mu[511] > 0.5 * ceiling);
    }

    #[test]
    fn rows_account_for_the_compressed_stream() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut input = Bits::new();
        for _ in 0..40000u32 {
            input.push(u8::from(rng.random::<f64>() < 0.1));
        }
        let row = bench_bits("synthetic", &input, 4, Scheme::Global, None, None, 0.2).unwrap();
        assert_eq!(row.n_bits, 40000);
        assert!(row.gamma > 0.0 && row.gamma < 8.0, "gamma {}", row.gamma);
        assert!(row.rho > 0.0);
        let content = row.model_bits + row.raw_bits + row.payload_bits;
        let padded_bytes = row.gamma * row.n_bits as f64 / 64.0;
        assert!(content as f64 <= padded_bytes * 8.0);
        assert!(row.mu_mbps > 0.0);
    }

    #[test]
    fn csv_has_the_fixed_column_order() {
        let rows = vec![BenchRow {
            file: "x".into(),
            n_bits: 8,
            blocks: 1,
            scheme: 0,
            gamma: 8.0,
            rho: 1.5,
            model_bits: 3,
            param_bits: 2,
            raw_bits: 0,
            payload_bits: 5,
            ts_ms: 0.5,
            tsp_ms: 1.5,
            mu_mbps: 3.25,
        }];
        let csv = to_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "file,N,B,scheme,gamma,rho,model_bits,param_bits,raw_bits,payload_bits,ts_ms,tsp_ms,mu_mbps"
        );
        assert_eq!(
            lines.next().unwrap(),
            "x,8,1,0,8.0000,1.5,3,2,0,5,0.500,1.500,3.25"
        );
    }
}
