//! Deployment of a binarized model onto tiles and analog inference.
//!
//! Partial currents of a horizontal chain are summed losslessly into the
//! next tile's sense node; the forwarding path only adds `I^2 r_demux` to the
//! power budget. Each tile is solved on its own. Hidden neurons regenerate
//! full-swing `{0, vdd}` row drivers for the next layer.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::circuit::exact::ExactSum;
use crate::circuit::{
    crossbar_power, ideal_mvm_accumulate, ideal_power, solve_dc_with, CellMatrix, NodalSystem, PairAccumulator,
    PairMatrix, TileNetwork,
};
use crate::error::{Error, Result};
use crate::io::Dataset;
use crate::model::BinarizedModel;
use crate::neuron::{activate_hidden, readout_output_layer, sense_differential, NeuronConfig, NoiseStream};
use crate::partition::{plan_network, PartitionPlan};
use crate::tech::{binarize_input, FabricConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Inventory {
    pub tiles: usize,
    pub neurons: usize,
    pub demux: usize,
    pub switches: usize,
}

#[derive(Debug)]
pub struct DeployedTile {
    pub pairs: PairMatrix,
    /// Prebuilt nodal network, present when parasitics are enabled.
    pub network: Option<Arc<TileNetwork>>,
}

#[derive(Debug)]
pub struct DeployedLayer {
    pub plan: PartitionPlan,
    pub tiles: Vec<DeployedTile>,
}

#[derive(Debug)]
pub struct DeployedNetwork {
    fabric: FabricConfig,
    layers: Vec<DeployedLayer>,
    inventory: Inventory,
}

pub fn deploy(model: &BinarizedModel, fabric: &FabricConfig) -> Result<DeployedNetwork> {
    fabric.validate()?;
    let plans = plan_network(model, fabric)?;
    let mut layers = Vec::with_capacity(plans.len());
    for (plan, layer) in plans.into_iter().zip(model.layers()) {
        let mut tiles = Vec::with_capacity(plan.tiles.len());
        for tile in &plan.tiles {
            let pairs = PairMatrix::from_fn(tile.rows(), tile.outputs(), |k, o| {
                fabric.pair_of(layer.weight(tile.row_range.start + k, tile.out_range.start + o))
            });
            let network = if fabric.parasitics_enabled {
                Some(Arc::new(TileNetwork::build(&CellMatrix::from_pairs(&pairs), fabric)?))
            } else {
                None
            };
            tiles.push(DeployedTile { pairs, network });
        }
        layers.push(DeployedLayer { plan, tiles });
    }
    let inventory = Inventory {
        tiles: layers.iter().map(|l| l.plan.tile_count()).sum(),
        neurons: model.neuron_count(),
        demux: layers.iter().map(|l| l.plan.demux_count()).sum(),
        switches: layers.iter().map(|l| l.plan.tile_count()).sum(),
    };
    Ok(DeployedNetwork {
        fabric: fabric.clone(),
        layers,
        inventory,
    })
}

impl DeployedNetwork {
    pub fn fabric(&self) -> &FabricConfig {
        &self.fabric
    }

    pub fn layers(&self) -> &[DeployedLayer] {
        &self.layers
    }

    pub fn inventory(&self) -> Inventory {
        self.inventory
    }

    pub fn input_len(&self) -> usize {
        self.layers[0].plan.matrix_rows
    }

    pub fn tiles_per_layer(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.plan.tile_count()).collect()
    }

    /// Image pixels to row voltages.
    pub fn encode(&self, pixels: &[f32]) -> Result<Vec<f64>> {
        pixels
            .iter()
            .map(|&p| binarize_input(p as f64, &self.fabric.technology))
            .collect()
    }

    /// Per-image power that does not depend on the data.
    fn static_power(&self) -> (f64, f64, f64) {
        let t = &self.fabric.technology;
        let inv = self.inventory;
        (
            inv.neurons as f64 * t.p_neuron,
            inv.demux as f64 * t.p_demux,
            inv.switches as f64 * t.p_switch,
        )
    }
}

/// Power of one inference, in watts.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PowerBreakdown {
    pub crossbar: f64,
    pub neurons: f64,
    pub demux: f64,
    pub switches: f64,
}

impl PowerBreakdown {
    pub fn total(&self) -> f64 {
        self.crossbar + self.neurons + self.demux + self.switches
    }

    pub fn peripheral(&self) -> f64 {
        self.neurons + self.demux + self.switches
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub class: usize,
    /// Differential voltages of the output layer neurons.
    pub output_voltages: Vec<f64>,
    pub power: PowerBreakdown,
}

/// Sums each output's partial currents over its chain. Returns the layer's
/// accumulated currents, crossbar power and forwarding (DEMUX) power.
fn run_layer(
    net: &DeployedNetwork,
    index: usize,
    inputs: &[f64],
) -> Result<(Vec<PairAccumulator>, f64, f64)> {
    let layer = &net.layers[index];
    let plan = &layer.plan;
    let r_demux = net.fabric.technology.r_demux;
    let mut acc = vec![PairAccumulator::new(); plan.matrix_outputs];
    let mut xbar = ExactSum::new();
    let mut forward = ExactSum::new();
    for v in 0..plan.v_p {
        for h in 0..plan.h_p {
            let id = plan.tile_id(h, v);
            let tile = &plan.tiles[id];
            let deployed = &layer.tiles[id];
            let x = &inputs[tile.row_range.clone()];
            let out = &mut acc[tile.out_range.clone()];
            let wrap = |e: Error| Error::Tile {
                layer: index,
                tile: id,
                source: Box::new(e),
            };
            match &deployed.network {
                None => {
                    ideal_mvm_accumulate(&deployed.pairs, x, out).map_err(wrap)?;
                    xbar.add(ideal_power(&deployed.pairs, x).map_err(wrap)?);
                }
                Some(network) => {
                    let system = NodalSystem::new(Arc::clone(network), x).map_err(wrap)?;
                    let sol = solve_dc_with(&system, &net.fabric.solver).map_err(wrap)?;
                    for (o, a) in out.iter_mut().enumerate() {
                        a.add_currents(sol.foot_currents[2 * o], sol.foot_currents[2 * o + 1]);
                    }
                    xbar.add(crossbar_power(&system, &sol).map_err(wrap)?);
                }
            }
            if h + 1 < plan.h_p {
                for a in out.iter() {
                    let c = a.currents();
                    forward.add((c.i_plus * c.i_plus + c.i_minus * c.i_minus) * r_demux);
                }
            }
        }
    }
    Ok((acc, xbar.value(), forward.value()))
}

/// One analog forward pass. `voltages` are the first layer's row drivers;
/// noise draws come from a stream seeded with `seed`, one per neuron.
pub fn forward_analog(net: &DeployedNetwork, voltages: &[f64], seed: u64) -> Result<Inference> {
    if voltages.len() != net.input_len() {
        return Err(Error::ShapeMismatch {
            what: "image voltages",
            expected: net.input_len(),
            found: voltages.len(),
        });
    }
    let cfg = NeuronConfig::from_technology(&net.fabric.technology);
    let mut noise = NoiseStream::new(seed);
    let (neurons, demux_static, switches) = net.static_power();
    let mut power = PowerBreakdown {
        crossbar: 0.0,
        neurons,
        demux: demux_static,
        switches,
    };
    let mut x = voltages.to_vec();
    let last = net.layers.len() - 1;
    for index in 0..net.layers.len() {
        let (acc, xbar, forward) = run_layer(net, index, &x)?;
        power.crossbar += xbar;
        power.demux += forward;
        let v: Vec<f64> = acc
            .iter()
            .map(|a| sense_differential(a.currents().i_diff, &cfg, &mut noise))
            .collect();
        if index == last {
            return Ok(Inference {
                class: readout_output_layer(&v)?,
                output_voltages: v,
                power,
            });
        }
        x = v.iter().map(|&d| activate_hidden(d, &cfg)).collect();
    }
    unreachable!("a model has at least one layer")
}

/// Integer pre-activations of the last layer for `{0, 1}` inputs.
pub fn digital_logits(model: &BinarizedModel, bits: &[u8]) -> Result<Vec<i32>> {
    if bits.len() != model.input_len() {
        return Err(Error::ShapeMismatch {
            what: "image bits",
            expected: model.input_len(),
            found: bits.len(),
        });
    }
    if let Some(b) = bits.iter().find(|&&b| b > 1) {
        return Err(Error::InvalidInput(format!("input bit {b} is not 0 or 1")));
    }
    let mut a: Vec<u8> = bits.to_vec();
    let last = model.layers().len() - 1;
    for (index, layer) in model.layers().iter().enumerate() {
        let mut z = vec![0i32; layer.outputs()];
        for (k, _) in a.iter().enumerate().filter(|(_, &b)| b == 1) {
            for (zi, w) in z.iter_mut().zip(layer.row(k)) {
                *zi += w.value();
            }
        }
        if index == last {
            return Ok(z);
        }
        a = z.iter().map(|&v| u8::from(v >= 0)).collect();
    }
    unreachable!("a model has at least one layer")
}

/// Integer reference forward: hidden units fire on `z >= 0`, the class is
/// the first maximal output.
pub fn forward_digital(model: &BinarizedModel, bits: &[u8]) -> Result<usize> {
    let z = digital_logits(model, bits)?;
    let mut best = 0;
    for (i, &v) in z.iter().enumerate() {
        if v > z[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Digital accuracy over the first `n_images` of `dataset`.
pub fn digital_accuracy(model: &BinarizedModel, dataset: &Dataset, n_images: usize) -> Result<f64> {
    let n = n_images.min(dataset.len());
    if n == 0 {
        return Ok(0.0);
    }
    let mut correct = 0;
    for i in 0..n {
        if forward_digital(model, &dataset.bits(i))? == dataset.label(i) as usize {
            correct += 1;
        }
    }
    Ok(correct as f64 / n as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub subarray: (usize, usize),
    pub technology: String,
    pub bitcell: String,
    pub parasitics: bool,
    pub images_evaluated: usize,
    pub correct: usize,
    pub accuracy: f64,
    /// Accuracy of the integer reference on the same images.
    pub digital_accuracy: f64,
    /// Images whose analog class equals the digital class.
    pub agreement: usize,
    /// Mean over images.
    pub power: PowerBreakdown,
    pub tiles_per_layer: Vec<usize>,
    pub inventory: Inventory,
}

impl EvaluationReport {
    pub const CSV_HEADER: [&'static str; 14] = [
        "size",
        "tech",
        "bitcell",
        "parasitics",
        "images",
        "accuracy",
        "digital_accuracy",
        "agreement",
        "p_total",
        "p_xbar",
        "p_neuron",
        "p_demux",
        "p_switch",
        "tiles",
    ];

    pub fn csv_record(&self) -> Vec<String> {
        let tiles: Vec<String> = self.tiles_per_layer.iter().map(usize::to_string).collect();
        vec![
            format!("{}x{}", self.subarray.0, self.subarray.1),
            self.technology.clone(),
            self.bitcell.clone(),
            self.parasitics.to_string(),
            self.images_evaluated.to_string(),
            format!("{:.6}", self.accuracy),
            format!("{:.6}", self.digital_accuracy),
            self.agreement.to_string(),
            format!("{:.9e}", self.power.total()),
            format!("{:.9e}", self.power.crossbar),
            format!("{:.9e}", self.power.neurons),
            format!("{:.9e}", self.power.demux),
            format!("{:.9e}", self.power.switches),
            tiles.join("/"),
        ]
    }

    /// Header plus this report as one CSV row.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(Self::CSV_HEADER)?;
        w.write_record(self.csv_record())?;
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

impl fmt::Display for EvaluationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{}x{} {} {} parasitics={}",
            self.subarray.0, self.subarray.1, self.technology, self.bitcell, self.parasitics
        )?;
        writeln!(
            f,
            "accuracy {:.2}% ({}/{}), digital reference {:.2}%, agreement {}/{}",
            100.0 * self.accuracy,
            self.correct,
            self.images_evaluated,
            100.0 * self.digital_accuracy,
            self.agreement,
            self.images_evaluated
        )?;
        let p = &self.power;
        writeln!(
            f,
            "power {:.4} mW (crossbar {:.4}, neurons {:.4}, demux {:.4}, switches {:.4})",
            1e3 * p.total(),
            1e3 * p.crossbar,
            1e3 * p.neurons,
            1e3 * p.demux,
            1e3 * p.switches
        )?;
        write!(
            f,
            "tiles per layer {:?}, demux {}, switches {}, neurons {}",
            self.tiles_per_layer, self.inventory.demux, self.inventory.switches, self.inventory.neurons
        )
    }
}

/// Runs the first `n_images` of `dataset` through the fabric. Image `i` uses
/// noise seed `seed ^ i`. `jobs` bounds the worker count (0 means rayon's
/// default); results do not depend on it.
pub fn evaluate(
    net: &DeployedNetwork,
    model: &BinarizedModel,
    dataset: &Dataset,
    n_images: usize,
    seed: u64,
    jobs: usize,
) -> Result<EvaluationReport> {
    if n_images == 0 {
        return Err(Error::InvalidInput("image count must be at least 1".into()));
    }
    if n_images > dataset.len() {
        return Err(Error::InvalidInput(format!(
            "requested {n_images} images but the dataset has {}",
            dataset.len()
        )));
    }
    let run = |i: usize| -> Result<(Inference, usize)> {
        let v = net.encode(dataset.image(i))?;
        let inference = forward_analog(net, &v, NoiseStream::for_image(seed, i as u64).seed())?;
        let digital = forward_digital(model, &dataset.bits(i))?;
        Ok((inference, digital))
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<Result<(Inference, usize)>> =
        pool.install(|| (0..n_images).into_par_iter().map(run).collect());

    let mut correct = 0;
    let mut digital_correct = 0;
    let mut agreement = 0;
    let mut sums = [ExactSum::new(), ExactSum::new(), ExactSum::new(), ExactSum::new()];
    for (i, r) in results.into_iter().enumerate() {
        let (inf, digital) = r?;
        let label = dataset.label(i) as usize;
        correct += usize::from(inf.class == label);
        digital_correct += usize::from(digital == label);
        agreement += usize::from(inf.class == digital);
        let p = inf.power;
        for (s, v) in sums.iter_mut().zip([p.crossbar, p.neurons, p.demux, p.switches]) {
            s.add(v);
        }
    }
    let n = n_images as f64;
    let fabric = net.fabric();
    Ok(EvaluationReport {
        subarray: (fabric.rows, fabric.cols),
        technology: fabric.technology.name.clone(),
        bitcell: fabric.bitcell.to_string(),
        parasitics: fabric.parasitics_enabled,
        images_evaluated: n_images,
        correct,
        accuracy: correct as f64 / n,
        digital_accuracy: digital_correct as f64 / n,
        agreement,
        power: PowerBreakdown {
            crossbar: sums[0].value() / n,
            neurons: sums[1].value() / n,
            demux: sums[2].value() / n,
            switches: sums[3].value() / n,
        },
        tiles_per_layer: net.tiles_per_layer(),
        inventory: net.inventory(),
    })
}
