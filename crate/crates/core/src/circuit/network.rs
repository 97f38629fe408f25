//! DC nodal model of one crossbar tile.
//!
//! Distributed layout (parasitics on, `r_wire_seg > 0`): every cell crossing
//! has a row node and a column node, so there are `2 * rows * cols` unknowns.
//! Row `i` is driven at its left end: source `V_i` -> `r_source + r_wire_seg`
//! -> row-node(i,0) -> `r_wire_seg` -> ... -> row-node(i,cols-1). Column `j`
//! runs top to bottom: col-node(0,j) -> `r_wire_seg` -> ... ->
//! col-node(rows-1,j) -> `r_wire_seg + r_sense` -> ground. The cell at (i,j)
//! joins row-node(i,j) to col-node(i,j).
//!
//! Lumped layout (parasitics off or zero wire resistance): each row wire is a
//! single node, held at `V_i` unless the driver has a source resistance, and
//! each column wire is a single node tied to ground through `r_sense`, or
//! grounded outright when `r_sense` is zero.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::tech::{ConductancePair, FabricConfig};

use super::exact::ExactSum;
use super::ideal::PairMatrix;
use super::sparse::{CsrMatrix, LinePreconditioner};
use super::Preconditioner;

/// Raw cell conductances of a tile, `rows x cols` physical columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMatrix {
    rows: usize,
    cols: usize,
    g: Vec<f64>,
}

impl CellMatrix {
    pub fn new(rows: usize, cols: usize, g: Vec<f64>) -> Result<Self> {
        if g.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                what: "cell conductances",
                expected: rows * cols,
                found: g.len(),
            });
        }
        Ok(Self { rows, cols, g })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let g = (0..rows * cols).map(|idx| f(idx / cols, idx % cols)).collect();
        Self { rows, cols, g }
    }

    /// Interleaves each output's pair: column `2i` carries `I+`, `2i+1` carries `I-`.
    pub fn from_pairs(pairs: &PairMatrix) -> Self {
        Self::from_fn(pairs.rows(), 2 * pairs.outputs(), |k, j| {
            let p: ConductancePair = pairs.get(k, j / 2);
            if j % 2 == 0 {
                p.g_plus
            } else {
                p.g_minus
            }
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.g[row * self.cols + col]
    }
}

/// End point of a circuit element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    Unknown(usize),
    Ground,
    /// The ideal voltage source driving tile row `i`.
    Source(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    /// Driver output: source resistance plus the first row segment.
    Driver,
    RowWire,
    ColumnWire,
    Cell,
    /// Column foot to ground: last column segment plus sense resistance.
    Sense,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Element {
    pub a: Terminal,
    pub b: Terminal,
    pub conductance: f64,
    pub kind: ElementKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Distributed,
    Lumped,
}

/// Everything about a tile that does not depend on the input voltages.
#[derive(Debug)]
pub struct TileNetwork {
    rows: usize,
    cols: usize,
    layout: Layout,
    unknowns: usize,
    elements: Vec<Element>,
    /// Elements that deliver current into ground at each column foot.
    feet: Vec<Vec<usize>>,
    /// Elements attached to each row's source.
    drivers: Vec<Vec<usize>>,
    matrix: CsrMatrix,
    line_precond: LinePreconditioner,
    jacobi_precond: LinePreconditioner,
}

impl TileNetwork {
    pub fn build(cells: &CellMatrix, fabric: &FabricConfig) -> Result<Self> {
        if cells.rows == 0 || cells.cols == 0 {
            return Err(Error::InvalidInput("tile must have at least one cell".into()));
        }
        if let Some(bad) = cells.g.iter().find(|g| !g.is_finite() || **g <= 0.0) {
            return Err(Error::InvalidInput(format!("cell conductance {bad} is not finite and positive")));
        }
        let tech = &fabric.technology;
        let distributed = fabric.parasitics_enabled && tech.r_wire_seg > 0.0;
        let (rows, cols) = (cells.rows, cells.cols);
        let mut elements = Vec::new();
        let mut feet = vec![Vec::new(); cols];
        let mut drivers = vec![Vec::new(); rows];
        let mut lines: Vec<Vec<usize>> = Vec::new();
        let unknowns;

        if distributed {
            unknowns = 2 * rows * cols;
            let row_node = |i: usize, j: usize| 2 * (i * cols + j);
            let col_node = |i: usize, j: usize| 2 * (i * cols + j) + 1;
            let g_seg = 1.0 / tech.r_wire_seg;
            for (i, driver) in drivers.iter_mut().enumerate() {
                driver.push(elements.len());
                elements.push(Element {
                    a: Terminal::Source(i),
                    b: Terminal::Unknown(row_node(i, 0)),
                    conductance: 1.0 / (fabric.r_source + tech.r_wire_seg),
                    kind: ElementKind::Driver,
                });
                for j in 1..cols {
                    elements.push(Element {
                        a: Terminal::Unknown(row_node(i, j - 1)),
                        b: Terminal::Unknown(row_node(i, j)),
                        conductance: g_seg,
                        kind: ElementKind::RowWire,
                    });
                }
                lines.push((0..cols).map(|j| row_node(i, j)).collect());
            }
            for (j, foot) in feet.iter_mut().enumerate() {
                for i in 1..rows {
                    elements.push(Element {
                        a: Terminal::Unknown(col_node(i - 1, j)),
                        b: Terminal::Unknown(col_node(i, j)),
                        conductance: g_seg,
                        kind: ElementKind::ColumnWire,
                    });
                }
                foot.push(elements.len());
                elements.push(Element {
                    a: Terminal::Unknown(col_node(rows - 1, j)),
                    b: Terminal::Ground,
                    conductance: 1.0 / (tech.r_wire_seg + tech.r_sense),
                    kind: ElementKind::Sense,
                });
                lines.push((0..rows).map(|i| col_node(i, j)).collect());
            }
            for i in 0..rows {
                for j in 0..cols {
                    elements.push(Element {
                        a: Terminal::Unknown(row_node(i, j)),
                        b: Terminal::Unknown(col_node(i, j)),
                        conductance: cells.get(i, j),
                        kind: ElementKind::Cell,
                    });
                }
            }
        } else {
            let mut next = 0;
            let row_terms: Vec<Terminal> = (0..rows)
                .map(|i| {
                    if fabric.r_source > 0.0 {
                        next += 1;
                        Terminal::Unknown(next - 1)
                    } else {
                        Terminal::Source(i)
                    }
                })
                .collect();
            let col_terms: Vec<Terminal> = (0..cols)
                .map(|_| {
                    if tech.r_sense > 0.0 {
                        next += 1;
                        Terminal::Unknown(next - 1)
                    } else {
                        Terminal::Ground
                    }
                })
                .collect();
            unknowns = next;
            for (i, &t) in row_terms.iter().enumerate() {
                if let Terminal::Unknown(u) = t {
                    drivers[i].push(elements.len());
                    elements.push(Element {
                        a: Terminal::Source(i),
                        b: t,
                        conductance: 1.0 / fabric.r_source,
                        kind: ElementKind::Driver,
                    });
                    lines.push(vec![u]);
                }
            }
            for (j, &t) in col_terms.iter().enumerate() {
                if let Terminal::Unknown(u) = t {
                    feet[j].push(elements.len());
                    elements.push(Element {
                        a: t,
                        b: Terminal::Ground,
                        conductance: 1.0 / tech.r_sense,
                        kind: ElementKind::Sense,
                    });
                    lines.push(vec![u]);
                }
            }
            for i in 0..rows {
                for j in 0..cols {
                    let idx = elements.len();
                    if let Terminal::Source(_) = row_terms[i] {
                        drivers[i].push(idx);
                    }
                    if col_terms[j] == Terminal::Ground {
                        feet[j].push(idx);
                    }
                    elements.push(Element {
                        a: row_terms[i],
                        b: col_terms[j],
                        conductance: cells.get(i, j),
                        kind: ElementKind::Cell,
                    });
                }
            }
        }

        let mut triplets = Vec::with_capacity(4 * elements.len());
        for e in &elements {
            match (e.a, e.b) {
                (Terminal::Unknown(a), Terminal::Unknown(b)) => {
                    triplets.push((a, a, e.conductance));
                    triplets.push((b, b, e.conductance));
                    triplets.push((a, b, -e.conductance));
                    triplets.push((b, a, -e.conductance));
                }
                (Terminal::Unknown(a), _) | (_, Terminal::Unknown(a)) => {
                    triplets.push((a, a, e.conductance));
                }
                _ => {}
            }
        }
        let matrix = CsrMatrix::from_triplets(unknowns, &mut triplets);
        let line_precond = LinePreconditioner::new(&matrix, &lines)?;
        let singletons: Vec<Vec<usize>> = (0..unknowns).map(|u| vec![u]).collect();
        let jacobi_precond = LinePreconditioner::new(&matrix, &singletons)?;
        Ok(Self {
            rows,
            cols,
            layout: if distributed {
                Layout::Distributed
            } else {
                Layout::Lumped
            },
            unknowns,
            elements,
            feet,
            drivers,
            matrix,
            line_precond,
            jacobi_precond,
        })
    }

    pub(crate) fn preconditioner(&self, kind: Preconditioner) -> &LinePreconditioner {
        match kind {
            Preconditioner::Line => &self.line_precond,
            Preconditioner::Jacobi => &self.jacobi_precond,
        }
    }
}

/// A tile network together with the row voltages driving it.
#[derive(Debug, Clone)]
pub struct NodalSystem {
    network: Arc<TileNetwork>,
    inputs: Vec<f64>,
    rhs: Vec<f64>,
}

/// Builds the nodal system of one tile.
pub fn build_network(cells: &CellMatrix, fabric: &FabricConfig, inputs: &[f64]) -> Result<NodalSystem> {
    let network = Arc::new(TileNetwork::build(cells, fabric)?);
    NodalSystem::new(network, inputs)
}

impl NodalSystem {
    pub fn new(network: Arc<TileNetwork>, inputs: &[f64]) -> Result<Self> {
        if inputs.len() != network.rows {
            return Err(Error::ShapeMismatch {
                what: "tile inputs",
                expected: network.rows,
                found: inputs.len(),
            });
        }
        if let Some(v) = inputs.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("input voltage {v} is not finite")));
        }
        let mut rhs = vec![0.0; network.unknowns];
        for e in &network.elements {
            match (e.a, e.b) {
                (Terminal::Source(i), Terminal::Unknown(u)) | (Terminal::Unknown(u), Terminal::Source(i)) => {
                    rhs[u] += e.conductance * inputs[i];
                }
                _ => {}
            }
        }
        Ok(Self {
            network,
            inputs: inputs.to_vec(),
            rhs,
        })
    }

    pub fn network(&self) -> &Arc<TileNetwork> {
        &self.network
    }

    pub fn rows(&self) -> usize {
        self.network.rows
    }

    pub fn cols(&self) -> usize {
        self.network.cols
    }

    pub fn layout(&self) -> Layout {
        self.network.layout
    }

    pub fn unknowns(&self) -> usize {
        self.network.unknowns
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.network.matrix
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn elements(&self) -> &[Element] {
        &self.network.elements
    }

    pub(crate) fn terminal_voltage(&self, t: Terminal, x: &[f64]) -> f64 {
        match t {
            Terminal::Unknown(u) => x[u],
            Terminal::Ground => 0.0,
            Terminal::Source(i) => self.inputs[i],
        }
    }

    fn element_current(&self, e: &Element, x: &[f64]) -> f64 {
        e.conductance * (self.terminal_voltage(e.a, x) - self.terminal_voltage(e.b, x))
    }

    /// Current flowing into ground at each column foot for node voltages `x`.
    pub fn foot_currents(&self, x: &[f64]) -> Vec<f64> {
        self.network
            .feet
            .iter()
            .map(|ids| {
                ids.iter()
                    .map(|&id| self.element_current(&self.network.elements[id], x))
                    .collect::<ExactSum>()
                    .value()
            })
            .collect()
    }

    /// `sum G dV^2` over every resistive element.
    pub fn dissipated_power(&self, x: &[f64]) -> f64 {
        self.network
            .elements
            .iter()
            .map(|e| {
                let dv = self.terminal_voltage(e.a, x) - self.terminal_voltage(e.b, x);
                e.conductance * dv * dv
            })
            .sum()
    }

    /// `sum V_in I_in` over the row drivers.
    pub fn source_power(&self, x: &[f64]) -> f64 {
        self.network
            .drivers
            .iter()
            .enumerate()
            .map(|(i, ids)| {
                let current: f64 = ids
                    .iter()
                    .map(|&id| self.element_current(&self.network.elements[id], x))
                    .sum();
                self.inputs[i] * current
            })
            .sum()
    }

    /// Text netlist for cross-checking against external simulators: one
    /// element per line as `node_a node_b conductance`, where nodes are
    /// `n<k>` for unknowns, `0` for ground and `v<i>` for row source `i`.
    pub fn netlist(&self) -> String {
        let name = |t: Terminal| match t {
            Terminal::Unknown(u) => format!("n{u}"),
            Terminal::Ground => "0".to_string(),
            Terminal::Source(i) => format!("v{i}"),
        };
        let mut s = format!(
            "* tile {}x{} {:?} unknowns={}\n",
            self.rows(),
            self.cols(),
            self.layout(),
            self.unknowns()
        );
        for (i, v) in self.inputs.iter().enumerate() {
            let _ = writeln!(s, "* v{i} = {v:e} V");
        }
        for e in self.elements() {
            let _ = writeln!(s, "{} {} {:e}", name(e.a), name(e.b), e.conductance);
        }
        s
    }
}
