//! Brute-force reference computations, written independently of the
//! library's code paths (plain loops, no compensated sums, no closed forms
//! beyond the definitions).
#![allow(dead_code)]

/// Population Pearson correlation between the 0/1 indicator and `y`,
/// straight from the definition. `None` when either variance is zero.
pub fn pearson(flags: &[bool], y: &[f64]) -> Option<f64> {
    let n = y.len() as f64;
    let r: Vec<f64> = flags.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let mr = r.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vr = 0.0;
    let mut vy = 0.0;
    for i in 0..y.len() {
        cov += (r[i] - mr) * (y[i] - my);
        vr += (r[i] - mr) * (r[i] - mr);
        vy += (y[i] - my) * (y[i] - my);
    }
    if vr == 0.0 || vy <= 1e-300 || y.iter().all(|&v| v == y[0]) {
        return None;
    }
    Some(cov / (vr * vy).sqrt())
}

pub fn sample_mean(flags: &[bool], y: &[f64]) -> f64 {
    let picked: Vec<f64> = y
        .iter()
        .zip(flags)
        .filter(|(_, &f)| f)
        .map(|(&v, _)| v)
        .collect();
    picked.iter().sum::<f64>() / picked.len() as f64
}

/// Effective sample size from its definition, capped at `N`.
pub fn n_eff(rho: f64, n: usize, big_n: usize) -> f64 {
    let f = n as f64 / big_n as f64;
    if rho == 0.0 || n == big_n {
        return big_n as f64;
    }
    (f / (1.0 - f) / (rho * rho)).min(big_n as f64)
}

/// Bit pattern `mask` over `len` positions as flags.
pub fn flags_of(mask: u32, len: usize) -> Vec<bool> {
    (0..len).map(|i| mask >> i & 1 == 1).collect()
}

pub fn values_of(mask: u32, len: usize) -> Vec<f64> {
    (0..len).map(|i| (mask >> i & 1) as f64).collect()
}

/// Every membership of size `n` over `y`, scored by `pearson`.
pub fn correlations_of_size(y: &[f64], n: usize) -> Vec<(u32, f64)> {
    let len = y.len();
    (0u32..1 << len)
        .filter(|m| m.count_ones() as usize == n)
        .filter_map(|m| pearson(&flags_of(m, len), y).map(|r| (m, r)))
        .collect()
}

/// Coarse cells by exhaustive block scan: for each block that contains a
/// fine cell, (block, any occupied, any sampled).
pub fn coarse_blocks(
    cells: &[(u32, u32)],
    y: &[f64],
    flags: &[bool],
    k: u32,
) -> Vec<((u32, u32), bool, bool)> {
    let max_row = cells.iter().map(|c| c.0).max().unwrap_or(0) / k;
    let max_col = cells.iter().map(|c| c.1).max().unwrap_or(0) / k;
    let mut out = Vec::new();
    for br in 0..=max_row {
        for bc in 0..=max_col {
            let members: Vec<usize> = (0..cells.len())
                .filter(|&i| cells[i].0 / k == br && cells[i].1 / k == bc)
                .collect();
            if members.is_empty() {
                continue;
            }
            out.push((
                (br, bc),
                members.iter().any(|&i| y[i] == 1.0),
                members.iter().any(|&i| flags[i]),
            ));
        }
    }
    out
}
