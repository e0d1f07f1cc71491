//! Grid and strategy specs given on the command line or in `[eval]`.

use std::path::Path;

use anyhow::{bail, Context, Result};

use pifm::inference::{all_axis_orders, PathSpec, Strategy};

fn numbers(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad number {v:?} in {s:?}")))
        .collect()
}

/// Points `k·h` with nonnegative coordinates summing to at most 1, in lexicographic order.
pub fn simplex_grid(n: usize, spacing: f64) -> Result<Vec<Vec<f64>>> {
    if !(spacing > 0.0 && spacing <= 1.0) {
        bail!("simplex spacing must lie in (0, 1], got {spacing}");
    }
    let m = (1.0 / spacing).round() as usize;
    if ((m as f64) * spacing - 1.0).abs() > 1e-9 {
        bail!("simplex spacing must divide 1 evenly, got {spacing}");
    }
    fn rec(n: usize, left: usize, m: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if cur.len() == n {
            out.push(cur.iter().map(|&k| k as f64 / m as f64).collect());
            return;
        }
        for k in 0..=left {
            cur.push(k);
            rec(n, left - k, m, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, m, m, &mut Vec::new(), &mut out);
    Ok(out)
}

/// `;`-separated items, each `simplex:<spacing>` or a comma list like `1.2,0.3`.
pub fn parse_grid(spec: &str, n: usize) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for item in spec.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some(h) = item.strip_prefix("simplex:") {
            let h: f64 = h.trim().parse().with_context(|| format!("bad simplex spacing in {item:?}"))?;
            out.extend(simplex_grid(n, h)?);
        } else {
            let p = numbers(item)?;
            if p.len() != n {
                bail!("grid point {item:?} has {} coordinates, expected {n}", p.len());
            }
            out.push(p);
        }
    }
    if out.is_empty() {
        bail!("grid spec {spec:?} has no points");
    }
    Ok(out)
}

/// `diagonal`, `order:<1-based perm>` or `path:<json file>`; the terminal is filled in later.
pub fn parse_strategy(spec: &str, n: usize, base: &Path) -> Result<Strategy> {
    let spec = spec.trim();
    if spec == "diagonal" {
        return Ok(Strategy::diagonal(vec![0.0; n]));
    }
    if let Some(order) = spec.strip_prefix("order:") {
        let order: Vec<usize> = order
            .split(',')
            .map(|v| v.trim().parse::<usize>().with_context(|| format!("bad axis {v:?} in {spec:?}")))
            .collect::<Result<_>>()?;
        let zero_based: Vec<usize> = order.iter().map(|&i| i.wrapping_sub(1)).collect();
        if !all_axis_orders(n).contains(&zero_based) {
            bail!("{spec:?} is not a permutation of 1..={n}");
        }
        return Ok(Strategy::axis_order(zero_based, vec![0.0; n]));
    }
    if let Some(file) = spec.strip_prefix("path:") {
        let path = base.join(file);
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading path {}", path.display()))?;
        let p: PathSpec = serde_json::from_str(&text).with_context(|| format!("parsing path {}", path.display()))?;
        p.validate()?;
        if p.n_params() != n {
            bail!("path has {} parameters, expected {n}", p.n_params());
        }
        return Ok(Strategy::Custom { path: p });
    }
    bail!("unknown strategy {spec:?}; expected diagonal, order:<perm> or path:<file>")
}

/// Comma list of `n` numbers.
pub fn parse_point(spec: &str, n: usize) -> Result<Vec<f64>> {
    let p = numbers(spec)?;
    if p.len() != n {
        bail!("parameter point {spec:?} has {} coordinates, expected {n}", p.len());
    }
    Ok(p)
}

/// File-name-safe strategy label.
pub fn slug(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '-' })
        .collect()
}
