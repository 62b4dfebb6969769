//! Federated averaging over simulated clients.
//!
//! Each round selects a subset of clients, broadcasts the global parameters,
//! lets every selected client train locally for `E` epochs, replaces the global
//! parameters with the element-wise mean of the returned ones, and evaluates the
//! new global model on every client's test split. Clients only ever see their
//! own shard; the server only ever holds parameter sets.

use std::cmp::Ordering;

use rand::seq::{index, SliceRandom};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ResultExt};
use crate::optim::OptimizerState;
use crate::seed::{rng_for, stream};
use crate::seqmodel::{ParamSet, SequenceModel};
use crate::targets::{ClientShard, SequencePair};

#[derive(Debug, Clone)]
pub struct ClientState<M> {
    pub id: usize,
    pub train: Vec<SequencePair>,
    pub test: Vec<SequencePair>,
    pub model: M,
    pub optimizer: OptimizerState,
}

impl<M: SequenceModel> ClientState<M> {
    pub fn from_shard(shard: ClientShard, model: M, optimizer: OptimizerState) -> Self {
        Self { id: shard.id, train: shard.train, test: shard.test, model, optimizer }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FederatedConfig {
    pub rounds: usize,
    pub local_epochs: usize,
    pub batch_size: usize,
    /// Clients selected per round.
    pub participation: usize,
    /// Train on one sampled batch per epoch instead of a full pass.
    pub one_batch_per_epoch: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub selected: Vec<usize>,
    pub per_client_train_loss: Vec<f64>,
    pub global_train_loss: f64,
    pub global_test_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalOutcome {
    pub params: ParamSet,
    /// Mean per-sample loss of the final epoch.
    pub loss: f64,
    pub optimizer_steps: usize,
}

/// Uniformly random `m_count`-subset of `0..num_clients`, ascending,
/// determined by `(seed, round)`.
pub fn select_clients(num_clients: usize, m_count: usize, seed: u64, round: usize) -> Result<Vec<usize>> {
    if m_count == 0 || m_count > num_clients {
        return Err(Error::config(format!("cannot select {m_count} of {num_clients} clients")));
    }
    let mut rng = rng_for(seed, &[stream::SELECTION, round as u64]);
    let mut ids = index::sample(&mut rng, num_clients, m_count).into_vec();
    ids.sort_unstable();
    Ok(ids)
}

/// Resets the client to `global`, runs `epochs` local epochs of mini-batch
/// training, and returns the updated parameters.
pub fn local_train<M: SequenceModel>(
    client: &mut ClientState<M>,
    global: &ParamSet,
    epochs: usize,
    batch_size: usize,
    one_batch_per_epoch: bool,
    rng: &mut impl rand::Rng,
) -> Result<LocalOutcome> {
    if epochs == 0 || batch_size == 0 {
        return Err(Error::config("local epochs and batch size must be at least 1"));
    }
    if client.train.is_empty() {
        return Err(Error::config(format!("client {} has no training data", client.id)));
    }
    client.model.load_params(global)?;
    let mut params = global.clone();
    let mut order: Vec<usize> = (0..client.train.len()).collect();
    let mut loss = 0.0;
    let mut steps = 0;

    for _ in 0..epochs {
        if one_batch_per_epoch {
            let take = batch_size.min(order.len());
            order = index::sample(rng, client.train.len(), take).into_vec();
        } else {
            order.shuffle(rng);
        }
        let mut epoch_loss = 0.0;
        for batch in order.chunks(batch_size) {
            let mut grad_sum: Option<ParamSet> = None;
            for &i in batch {
                let pair = &client.train[i];
                let (l, g) = client.model.loss_and_grad(&pair.inputs, pair.target)?;
                epoch_loss += l;
                match grad_sum.as_mut() {
                    Some(acc) => acc.add_scaled(&g, 1.0)?,
                    None => grad_sum = Some(g),
                }
            }
            let mut grad = grad_sum.expect("non-empty batch");
            grad.scale(1.0 / batch.len() as f64);
            client.optimizer.step(&mut params, &grad)?;
            client.model.load_params(&params)?;
            steps += 1;
        }
        loss = epoch_loss / order.len() as f64;
    }
    Ok(LocalOutcome { params, loss, optimizer_steps: steps })
}

/// Element-wise arithmetic mean of identically shaped parameter sets.
///
/// Each coordinate is the correctly rounded mean of its client values, so the
/// result does not depend on client order and `k` copies of the same
/// parameters average to exactly those parameters.
pub fn aggregate(params: &[ParamSet]) -> Result<ParamSet> {
    let first = params.first().ok_or_else(|| Error::config("nothing to aggregate"))?;
    for p in &params[1..] {
        first.check_same_layout(p)?;
    }
    let mut out = first.clone();
    let mut column = Vec::with_capacity(params.len());
    for (ti, tensor) in out.tensors.iter_mut().enumerate() {
        for (j, slot) in tensor.data.iter_mut().enumerate() {
            column.clear();
            column.extend(params.iter().map(|p| p.tensors[ti].data[j]));
            *slot = exact_mean(&mut column);
        }
    }
    Ok(out)
}

/// Mean of `values` rounded once, half to even. Reorders `values`.
pub(crate) fn exact_mean(values: &mut [f64]) -> f64 {
    let k = values.len() as f64;
    values.sort_by(f64::total_cmp);
    if values.iter().any(|v| !v.is_finite()) {
        return values.iter().sum::<f64>() / k;
    }
    let mut q = expansion(values).iter().sum::<f64>() / k;
    // q is the answer iff 2S lies between (q_down + q)k and (q + q_up)k.
    let twice: Vec<f64> = values.iter().map(|v| 2.0 * v).collect();
    let residual_sign = |a: f64, b: f64| {
        let mut terms = twice.clone();
        for x in [a, b] {
            let (p, e) = two_product(x, k);
            terms.push(-p);
            terms.push(-e);
        }
        exact_sign(&terms)
    };
    loop {
        let up = q.next_up();
        match residual_sign(q, up) {
            Ordering::Greater => {
                q = up;
                continue;
            }
            Ordering::Equal => return if q.to_bits() & 1 == 1 { up } else { q },
            Ordering::Less => {}
        }
        let down = q.next_down();
        match residual_sign(q, down) {
            Ordering::Less => q = down,
            Ordering::Equal => return if q.to_bits() & 1 == 1 { down } else { q },
            Ordering::Greater => return q,
        }
    }
}

fn two_product(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Non-overlapping partials, increasing in magnitude, summing exactly to `terms`.
fn expansion(terms: &[f64]) -> Vec<f64> {
    let mut partials: Vec<f64> = Vec::with_capacity(terms.len());
    for &t in terms {
        let mut x = t;
        let mut kept = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        partials.truncate(kept);
        partials.push(x);
    }
    partials
}

/// Sign of the exact sum of finite `terms`.
fn exact_sign(terms: &[f64]) -> Ordering {
    let partials = expansion(terms);
    let top = partials.iter().rev().find(|p| **p != 0.0).copied().unwrap_or(0.0);
    top.partial_cmp(&0.0).expect("finite terms")
}

/// Mean squared error of `model` over `pairs`.
pub fn evaluate<M: SequenceModel>(model: &M, pairs: &[SequencePair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::config("cannot evaluate on an empty set"));
    }
    let mut total = 0.0;
    for p in pairs {
        total += model.loss(&p.inputs, p.target)?;
    }
    Ok(total / pairs.len() as f64)
}

/// Mean over clients of each client's test MSE under `global`.
pub fn global_test_loss<M: SequenceModel>(clients: &[ClientState<M>], template: &M, global: &ParamSet) -> Result<f64> {
    let mut model = template.clone();
    model.load_params(global)?;
    let losses = clients
        .par_iter()
        .map(|c| evaluate(&model, &c.test).context(|| format!("client {} test set", c.id)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

/// Runs up to `config.rounds` communication rounds, updating `global` in place.
/// `stop` sees the records so far after every round; returning `true` ends training.
pub fn run_training<M: SequenceModel>(
    clients: &mut [ClientState<M>],
    template: &M,
    global: &mut ParamSet,
    config: &FederatedConfig,
    mut stop: impl FnMut(&[RoundRecord]) -> bool,
) -> Result<Vec<RoundRecord>> {
    if clients.is_empty() {
        return Err(Error::config("no clients"));
    }
    let mut records = Vec::with_capacity(config.rounds);
    for round in 1..=config.rounds {
        let selected = select_clients(clients.len(), config.participation, config.seed, round)?;
        let outcomes = clients
            .par_iter_mut()
            .filter(|c| selected.binary_search(&c.id).is_ok())
            .map(|c| {
                let mut rng = rng_for(config.seed, &[stream::SHUFFLE, round as u64, c.id as u64]);
                let id = c.id;
                local_train(c, global, config.local_epochs, config.batch_size, config.one_batch_per_epoch, &mut rng)
                    .context(|| format!("round {round}, client {id}"))
            })
            .collect::<Result<Vec<LocalOutcome>>>()?;

        let returned: Vec<ParamSet> = outcomes.iter().map(|o| o.params.clone()).collect();
        *global = aggregate(&returned).context(|| format!("round {round} aggregation"))?;
        let per_client_train_loss: Vec<f64> = outcomes.iter().map(|o| o.loss).collect();
        let global_train_loss = per_client_train_loss.iter().sum::<f64>() / per_client_train_loss.len() as f64;
        let global_test_loss = global_test_loss(clients, template, global).context(|| format!("round {round}"))?;
        if !(global_train_loss.is_finite() && global_test_loss.is_finite()) {
            return Err(Error::numeric(format!("round {round}: non-finite loss")));
        }
        records.push(RoundRecord { round, selected, per_client_train_loss, global_train_loss, global_test_loss });
        if stop(&records) {
            break;
        }
    }
    Ok(records)
}
