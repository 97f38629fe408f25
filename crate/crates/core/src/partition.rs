//! Tiling of a weight matrix onto fixed-size subarrays.
//!
//! A matrix of `rows x outputs` is cut horizontally (by input rows) into
//! `h_p` partitions whose partial output currents are forwarded through the
//! DEMUX chain and accumulated, and vertically (by outputs) into `v_p`
//! groups whose results are concatenated. Each logical output occupies a
//! differential column pair, so a subarray with `m` columns holds `m / 2`
//! outputs.

use std::fmt::Write as _;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::model::BinarizedModel;
use crate::tech::FabricConfig;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tile {
    pub row_range: Range<usize>,
    pub out_range: Range<usize>,
    /// Position in the accumulation chain; the last one feeds the neurons.
    pub h_index: usize,
    pub v_index: usize,
}

impl Tile {
    pub fn rows(&self) -> usize {
        self.row_range.len()
    }

    pub fn outputs(&self) -> usize {
        self.out_range.len()
    }

    /// Physical columns used (two per output).
    pub fn columns(&self) -> usize {
        2 * self.outputs()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionPlan {
    pub matrix_rows: usize,
    pub matrix_outputs: usize,
    pub subarray_rows: usize,
    pub subarray_cols: usize,
    pub h_p: usize,
    pub v_p: usize,
    pub tiles: Vec<Tile>,
    /// For every output, the tile ids contributing partial currents, in chain order.
    pub chains: Vec<Vec<usize>>,
}

impl PartitionPlan {
    pub fn tile_count(&self) -> usize {
        self.tiles.len()
    }

    /// Tiles that forward their partial currents to a successor through a DEMUX.
    pub fn demux_count(&self) -> usize {
        self.tiles.iter().filter(|t| t.h_index + 1 < self.h_p).count()
    }

    /// Tile id of horizontal position `h` in vertical group `v`.
    pub fn tile_id(&self, h: usize, v: usize) -> usize {
        v * self.h_p + h
    }

    /// Output span of each vertical group; sums to `matrix_outputs`.
    pub fn group_widths(&self) -> Vec<usize> {
        (0..self.v_p)
            .map(|v| self.tiles[self.tile_id(0, v)].outputs())
            .collect()
    }
}

fn split_evenly(total: usize, chunk: usize) -> Vec<usize> {
    let mut sizes = vec![chunk; total / chunk];
    if total % chunk != 0 {
        sizes.push(total % chunk);
    }
    sizes
}

/// Plans the default tiling: full-size partitions with the remainder in the
/// last partition of each direction.
pub fn plan_partitions(
    matrix_rows: usize,
    matrix_outputs: usize,
    fabric: &FabricConfig,
) -> Result<PartitionPlan> {
    fabric.validate()?;
    if matrix_rows == 0 || matrix_outputs == 0 {
        return Err(Error::InvalidInput(format!(
            "cannot partition an empty {matrix_rows}x{matrix_outputs} matrix"
        )));
    }
    let row_splits = split_evenly(matrix_rows, fabric.rows);
    let out_splits = split_evenly(matrix_outputs, fabric.pairs_per_subarray());
    plan_with_splits(&row_splits, &out_splits, fabric.rows, fabric.cols)
}

/// Builds a plan from explicit partition sizes (rows per horizontal
/// partition, outputs per vertical group). Uneven splits are allowed as long
/// as every tile fits an `n x m` subarray.
pub fn plan_with_splits(
    row_splits: &[usize],
    out_splits: &[usize],
    subarray_rows: usize,
    subarray_cols: usize,
) -> Result<PartitionPlan> {
    if row_splits.is_empty() || out_splits.is_empty() {
        return Err(Error::InvalidInput("partition needs at least one split per direction".into()));
    }
    if let Some(&r) = row_splits.iter().find(|&&r| r == 0 || r > subarray_rows) {
        return Err(Error::InvalidInput(format!(
            "row partition of {r} does not fit {subarray_rows} subarray rows"
        )));
    }
    if let Some(&k) = out_splits.iter().find(|&&k| k == 0 || 2 * k > subarray_cols) {
        return Err(Error::InvalidInput(format!(
            "vertical group of {k} outputs does not fit {subarray_cols} subarray columns"
        )));
    }
    let h_p = row_splits.len();
    let v_p = out_splits.len();
    let matrix_rows = row_splits.iter().sum();
    let matrix_outputs = out_splits.iter().sum();

    let mut tiles = Vec::with_capacity(h_p * v_p);
    let mut chains = vec![Vec::new(); matrix_outputs];
    let mut out_start = 0;
    for (v, &k) in out_splits.iter().enumerate() {
        let mut row_start = 0;
        for (h, &r) in row_splits.iter().enumerate() {
            let id = tiles.len();
            tiles.push(Tile {
                row_range: row_start..row_start + r,
                out_range: out_start..out_start + k,
                h_index: h,
                v_index: v,
            });
            for chain in &mut chains[out_start..out_start + k] {
                chain.push(id);
            }
            row_start += r;
        }
        out_start += k;
    }
    Ok(PartitionPlan {
        matrix_rows,
        matrix_outputs,
        subarray_rows,
        subarray_cols,
        h_p,
        v_p,
        tiles,
        chains,
    })
}

/// One plan per layer, in layer order.
pub fn plan_network(model: &BinarizedModel, fabric: &FabricConfig) -> Result<Vec<PartitionPlan>> {
    model
        .layers()
        .iter()
        .map(|l| plan_partitions(l.inputs(), l.outputs(), fabric))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    EmptyTile { tile: usize },
    OutOfBounds { tile: usize },
    RowOverflow { tile: usize, rows: usize },
    /// The tile's outputs need more column pairs than the subarray has, so a
    /// pair would cross a vertical boundary.
    StraddledPair { tile: usize, columns: usize },
    BadIndex { tile: usize },
    Overlap { row: usize, output: usize, tiles: (usize, usize) },
    Gap { row: usize, output: usize, missing_cells: usize },
    BrokenChain { output: usize, reason: String },
}

/// Collects every invariant violation of `plan`. Violations are data: a
/// plan produced by [`plan_partitions`] yields an empty list.
pub fn validate_plan(plan: &PartitionPlan) -> Vec<Violation> {
    let mut out = Vec::new();
    let (rows, outs) = (plan.matrix_rows, plan.matrix_outputs);
    for (id, t) in plan.tiles.iter().enumerate() {
        if t.row_range.is_empty() || t.out_range.is_empty() {
            out.push(Violation::EmptyTile { tile: id });
            continue;
        }
        if t.row_range.end > rows || t.out_range.end > outs {
            out.push(Violation::OutOfBounds { tile: id });
        }
        if t.rows() > plan.subarray_rows {
            out.push(Violation::RowOverflow { tile: id, rows: t.rows() });
        }
        if t.columns() > plan.subarray_cols {
            out.push(Violation::StraddledPair { tile: id, columns: t.columns() });
        }
        if t.h_index >= plan.h_p || t.v_index >= plan.v_p {
            out.push(Violation::BadIndex { tile: id });
        }
    }

    // Cell-by-cell coverage.
    let mut owner: Vec<Option<usize>> = vec![None; rows * outs];
    let mut overlap_reported = false;
    for (id, t) in plan.tiles.iter().enumerate() {
        for r in t.row_range.start..t.row_range.end.min(rows) {
            for o in t.out_range.start..t.out_range.end.min(outs) {
                let cell = &mut owner[r * outs + o];
                match *cell {
                    Some(prev) if !overlap_reported => {
                        out.push(Violation::Overlap {
                            row: r,
                            output: o,
                            tiles: (prev, id),
                        });
                        overlap_reported = true;
                    }
                    Some(_) => {}
                    None => *cell = Some(id),
                }
            }
        }
    }
    let missing: Vec<usize> = owner
        .iter()
        .enumerate()
        .filter_map(|(i, o)| o.is_none().then_some(i))
        .collect();
    if let Some(&first) = missing.first() {
        out.push(Violation::Gap {
            row: first / outs,
            output: first % outs,
            missing_cells: missing.len(),
        });
    }

    if plan.chains.len() != outs {
        out.push(Violation::BrokenChain {
            output: plan.chains.len().min(outs),
            reason: format!("{} chains for {} outputs", plan.chains.len(), outs),
        });
    }
    for (o, chain) in plan.chains.iter().enumerate().take(outs) {
        if let Some(reason) = chain_problem(plan, o, chain) {
            out.push(Violation::BrokenChain { output: o, reason });
        }
    }
    out
}

fn chain_problem(plan: &PartitionPlan, output: usize, chain: &[usize]) -> Option<String> {
    if chain.len() != plan.h_p {
        return Some(format!("chain has {} tiles, expected {}", chain.len(), plan.h_p));
    }
    let mut rows_seen = 0;
    for (pos, &id) in chain.iter().enumerate() {
        let Some(t) = plan.tiles.get(id) else {
            return Some(format!("tile id {id} does not exist"));
        };
        if t.h_index != pos {
            return Some(format!("position {pos} holds h_index {}", t.h_index));
        }
        if !t.out_range.contains(&output) {
            return Some(format!("tile {id} does not produce output {output}"));
        }
        rows_seen += t.rows();
    }
    (rows_seen != plan.matrix_rows)
        .then(|| format!("chain covers {rows_seen} of {} rows", plan.matrix_rows))
}

/// Human-readable plan listing, one tile per line:
///
/// ```text
/// # layer h_index v_index rows outputs
/// 0 0 0 0..32 0..16
/// ```
///
/// Ranges are half-open. Lines starting with `#` are comments.
pub fn format_plans(plans: &[PartitionPlan]) -> String {
    let mut s = String::new();
    for (layer, plan) in plans.iter().enumerate() {
        let _ = writeln!(
            s,
            "# layer {layer}: {}x{} on {}x{} subarrays, h_p={} v_p={} tiles={}",
            plan.matrix_rows,
            plan.matrix_outputs,
            plan.subarray_rows,
            plan.subarray_cols,
            plan.h_p,
            plan.v_p,
            plan.tile_count()
        );
    }
    s.push_str("# layer h_index v_index rows outputs\n");
    for (layer, plan) in plans.iter().enumerate() {
        for t in &plan.tiles {
            let _ = writeln!(
                s,
                "{layer} {} {} {}..{} {}..{}",
                t.h_index, t.v_index, t.row_range.start, t.row_range.end, t.out_range.start, t.out_range.end
            );
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Layer;
    use crate::tech::{BitcellType, TechnologyProfile, Weight};
    use proptest::prelude::*;

    fn fabric(n: usize, m: usize) -> FabricConfig {
        FabricConfig::new(n, m, TechnologyProfile::mram(), BitcellType::OneT1R, true).unwrap()
    }

    fn model(dims: &[usize]) -> BinarizedModel {
        BinarizedModel::new(
            dims.windows(2)
                .map(|d| Layer::from_fn(d[0], d[1], |_, _| Weight::Plus))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn tile_counts() {
        let p = plan_partitions(400, 120, &fabric(32, 32)).unwrap();
        assert_eq!((p.h_p, p.v_p, p.tile_count()), (13, 8, 104));
        let p = plan_partitions(400, 120, &fabric(256, 256)).unwrap();
        assert_eq!((p.h_p, p.v_p, p.tile_count()), (2, 1, 2));
        let p = plan_partitions(84, 10, &fabric(128, 128)).unwrap();
        assert_eq!((p.h_p, p.v_p, p.tile_count()), (1, 1, 1));
        assert!(plan_partitions(0, 10, &fabric(32, 32)).is_err());
        assert!(plan_partitions(10, 0, &fabric(32, 32)).is_err());
    }

    #[test]
    fn network_plans() {
        let m = model(&[400, 120, 84, 10]);
        let counts = |n, c| {
            plan_network(&m, &fabric(n, c))
                .unwrap()
                .iter()
                .map(|p| p.tile_count())
                .collect::<Vec<_>>()
        };
        assert_eq!(counts(128, 128), vec![8, 2, 1]);
        assert_eq!(counts(256, 256), vec![2, 1, 1]);
        assert_eq!(counts(32, 32), vec![104, 24, 3]);
        assert_eq!(plan_network(&model(&[2, 2]), &fabric(32, 32)).unwrap()[0].tile_count(), 1);
    }

    #[test]
    fn remainder_goes_last() {
        let p = plan_partitions(400, 120, &fabric(32, 32)).unwrap();
        assert_eq!(p.tiles[p.tile_id(12, 0)].row_range, 384..400);
        assert_eq!(p.tiles[p.tile_id(0, 7)].out_range, 112..120);
        assert_eq!(p.group_widths().iter().sum::<usize>(), 120);
        assert_eq!(p.demux_count(), 12 * 8);
    }

    #[test]
    fn planner_output_is_valid() {
        let p = plan_partitions(400, 120, &fabric(32, 32)).unwrap();
        assert!(validate_plan(&p).is_empty());
    }

    #[test]
    fn detects_overlap() {
        let mut p = plan_partitions(64, 16, &fabric(32, 32)).unwrap();
        p.tiles[1].row_range = 16..64;
        let v = validate_plan(&p);
        assert!(v.iter().any(|x| matches!(x, Violation::Overlap { .. })), "{v:?}");
        assert!(v.iter().any(|x| matches!(x, Violation::RowOverflow { tile: 1, .. })));
    }

    #[test]
    fn detects_broken_chain() {
        let mut p = plan_partitions(64, 16, &fabric(32, 32)).unwrap();
        p.chains[3].remove(1);
        let v = validate_plan(&p);
        assert_eq!(v.len(), 1);
        assert!(matches!(&v[0], Violation::BrokenChain { output: 3, .. }));

        let mut p = plan_partitions(64, 16, &fabric(32, 32)).unwrap();
        p.chains[0].swap(0, 1);
        assert!(matches!(&validate_plan(&p)[0], Violation::BrokenChain { output: 0, .. }));
    }

    #[test]
    fn detects_gap_and_straddle() {
        let mut p = plan_partitions(32, 16, &fabric(32, 32)).unwrap();
        p.tiles[0].out_range = 0..15;
        let v = validate_plan(&p);
        assert!(v.iter().any(|x| matches!(x, Violation::Gap { missing_cells: 32, .. })));

        let mut p = plan_partitions(32, 16, &fabric(32, 32)).unwrap();
        p.matrix_outputs = 17;
        p.tiles[0].out_range = 0..17;
        p.chains.push(vec![0]);
        let v = validate_plan(&p);
        assert!(v.iter().any(|x| matches!(x, Violation::StraddledPair { columns: 34, .. })));
    }

    #[test]
    fn uneven_splits_accepted() {
        let p = plan_with_splits(&[10, 30, 24], &[3, 16, 5], 32, 32).unwrap();
        assert!(validate_plan(&p).is_empty());
        assert_eq!(p.group_widths(), vec![3, 16, 5]);
        assert!(plan_with_splits(&[33], &[1], 32, 32).is_err());
    }

    #[test]
    fn text_format() {
        let p = plan_partitions(40, 20, &fabric(32, 32)).unwrap();
        let text = format_plans(&[p]);
        let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows, vec!["0 0 0 0..32 0..16", "0 1 0 32..40 0..16", "0 0 1 0..32 16..20", "0 1 1 32..40 16..20"]);
    }

    proptest! {
        #[test]
        fn exact_cover(rows in 1usize..=64, outs in 1usize..=64, n in 1usize..40, half_m in 1usize..20) {
            let p = plan_partitions(rows, outs, &fabric(n, 2 * half_m)).unwrap();
            prop_assert!(validate_plan(&p).is_empty());
            prop_assert_eq!(p.h_p, rows.div_ceil(n));
            prop_assert_eq!(p.v_p, outs.div_ceil(half_m));
            prop_assert_eq!(p.tile_count(), p.h_p * p.v_p);
            let mut count = vec![0u8; rows * outs];
            for t in &p.tiles {
                for r in t.row_range.clone() {
                    for o in t.out_range.clone() {
                        count[r * outs + o] += 1;
                    }
                }
            }
            prop_assert!(count.iter().all(|&c| c == 1));
        }

        #[test]
        fn larger_subarrays_never_add_partitions(rows in 1usize..500, outs in 1usize..200, n in 1usize..200, half_m in 1usize..100, dn in 0usize..50, dm in 0usize..50) {
            let small = plan_partitions(rows, outs, &fabric(n, 2 * half_m)).unwrap();
            let big = plan_partitions(rows, outs, &fabric(n + dn, 2 * (half_m + dm))).unwrap();
            prop_assert!(big.h_p <= small.h_p);
            prop_assert!(big.v_p <= small.v_p);
        }

        #[test]
        fn exact_multiples_are_full(k in 1usize..6, j in 1usize..6, n in 1usize..20, half_m in 1usize..10) {
            let p = plan_partitions(k * n, j * half_m, &fabric(n, 2 * half_m)).unwrap();
            prop_assert!(p.tiles.iter().all(|t| t.rows() == n && t.columns() == 2 * half_m));
        }
    }
}
