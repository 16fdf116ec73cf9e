//! Human-readable report over a compressed container.

use crate::source::suffix_string;
use ptpmdl::codec::decode_model;
use ptpmdl::container::Container;
use ptpmdl::quant::Scheme;

fn byte_extent(bits: u64) -> u64 {
    bits.div_ceil(8)
}

/// Parses a serialized container and describes its model and layout.
/// Section sizes always sum to the byte length of the input.
pub fn report(bytes: &[u8]) -> ptpmdl::Result<String> {
    let c = Container::parse(bytes)?;
    let (model, _) = decode_model(c.n_bits, c.depth, c.scheme, c.tau, &c.model)?;
    let scheme_name = match c.scheme {
        Scheme::Global => "0 (one global quantizer)",
        Scheme::Scaled => "1 (quantizer sized per recovered state)",
        Scheme::TwoLevel => "2 (coarse/fine quantizer pair)",
    };

    let mut s = String::new();
    s.push_str(&format!("input bits     {}\n", c.n_bits));
    s.push_str(&format!("blocks         {}\n", c.payloads.len()));
    s.push_str(&format!("context depth  {}\n", c.depth));
    s.push_str(&format!("scheme         {scheme_name}\n"));
    if matches!(c.scheme, Scheme::TwoLevel) {
        s.push_str(&format!("tau            {}\n", c.tau));
    }
    s.push_str(&format!("states         {}\n", model.states.len()));
    s.push_str("  state      depth  levels  bin    p(1)\n");
    for st in &model.states {
        let mark = if st.coarse { " (coarse)" } else { "" };
        s.push_str(&format!(
            "  {:<9}  {:<5}  {:<6}  {:<5}  {:.4}{mark}\n",
            suffix_string(st.depth, st.value),
            st.depth,
            st.levels,
            st.bin,
            st.level,
        ));
    }

    let header = 31u64;
    let model_bytes = byte_extent(c.model.len());
    let offsets = 8 * c.payloads.len() as u64;
    let payload_bytes: u64 = c.payloads.iter().map(|p| byte_extent(p.len())).sum();
    s.push_str("sections (bytes)\n");
    s.push_str(&format!("  header    {header}\n"));
    s.push_str(&format!("  model     {model_bytes}\n"));
    s.push_str(&format!("  offsets   {offsets}\n"));
    s.push_str(&format!("  payloads  {payload_bytes}\n"));
    s.push_str(&format!(
        "  total     {}\n",
        header + model_bytes + offsets + payload_bytes
    ));
    Ok(s)
}
