use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    EvalReport, EvalRow, MarkovChain, SyntheticCorpusConfig, TaskError, FILLER_START, KEY, KEY_END, NUM_DIGITS,
    QUERY,
};
use crate::model::{Batch, Model};
use crate::numerics::{RngSeed, IGNORE_TARGET};

pub const KEY_DIGITS: usize = 5;
/// `KEY d d d d d /KEY`.
pub const KEY_BLOCK: usize = KEY_DIGITS + 2;
pub const MIN_CONTEXT: usize = 16;

/// `filler.. KEY d1..d5 /KEY filler.. QUERY d1..d5`, `context_length` tokens in
/// total. The answer digits are the last five tokens.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PasskeyInstance {
    pub tokens: Vec<usize>,
    pub key_digits: [usize; KEY_DIGITS],
    pub key_start: usize,
    /// Half-open index range of the answer digits.
    pub answer_span: (usize, usize),
}

impl PasskeyInstance {
    /// Model input (all but the last token) and targets scored only on the
    /// answer digits.
    pub fn training_pair(&self) -> (Vec<usize>, Vec<usize>) {
        let n = self.tokens.len();
        let input = self.tokens[..n - 1].to_vec();
        let target = (1..n)
            .map(|i| if i >= self.answer_span.0 { self.tokens[i] } else { IGNORE_TARGET })
            .collect();
        (input, target)
    }
}

/// Builds an instance; the key block starts at `round(fraction * (L - 13))`,
/// so fractions 0 and 1 put it flush against either end of the usable span.
pub fn gen_passkey(
    vocab_size: usize,
    context_length: usize,
    position_fraction: f64,
    seed: RngSeed,
) -> Result<PasskeyInstance, TaskError> {
    if context_length < MIN_CONTEXT {
        return Err(TaskError::ContextTooShort(context_length));
    }
    if vocab_size <= FILLER_START {
        return Err(TaskError::VocabTooSmall(vocab_size));
    }
    if !(0.0..=1.0).contains(&position_fraction) {
        return Err(TaskError::Invalid(format!("position fraction {position_fraction} outside [0, 1]")));
    }
    let mut rng = seed.rng();
    let mut key_digits = [0; KEY_DIGITS];
    for d in &mut key_digits {
        *d = rng.random_range(0..NUM_DIGITS);
    }
    let query_at = context_length - KEY_DIGITS - 1;
    let span = query_at - KEY_BLOCK;
    let key_start = (position_fraction * span as f64).round() as usize;
    let mut tokens: Vec<usize> = (0..context_length).map(|_| rng.random_range(FILLER_START..vocab_size)).collect();
    tokens[key_start] = KEY;
    tokens[key_start + 1..key_start + 1 + KEY_DIGITS].copy_from_slice(&key_digits);
    tokens[key_start + KEY_BLOCK - 1] = KEY_END;
    tokens[query_at] = QUERY;
    tokens[query_at + 1..].copy_from_slice(&key_digits);
    Ok(PasskeyInstance { tokens, key_digits, key_start, answer_span: (query_at + 1, context_length) })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParsedPasskey {
    pub key_digits: [usize; KEY_DIGITS],
    pub key_start: usize,
}

/// Recovers the key from a well-formed instance: one key block holding five
/// digits, the query sentinel right before five answer digits equal to the
/// key, and filler everywhere else.
pub fn parse_passkey(tokens: &[usize]) -> Option<ParsedPasskey> {
    let n = tokens.len();
    if n < MIN_CONTEXT {
        return None;
    }
    let query_at = n - KEY_DIGITS - 1;
    let starts: Vec<usize> = (0..query_at).filter(|&i| tokens[i] == KEY).collect();
    let [key_start] = starts[..] else { return None };
    if key_start + KEY_BLOCK > query_at || tokens[key_start + KEY_BLOCK - 1] != KEY_END {
        return None;
    }
    let digits = &tokens[key_start + 1..key_start + 1 + KEY_DIGITS];
    if digits.iter().any(|&d| d >= NUM_DIGITS) || tokens[query_at] != QUERY || &tokens[query_at + 1..] != digits {
        return None;
    }
    let filler_ok = (0..query_at)
        .filter(|&i| i < key_start || i >= key_start + KEY_BLOCK)
        .all(|i| tokens[i] >= FILLER_START);
    if !filler_ok {
        return None;
    }
    let mut key_digits = [0; KEY_DIGITS];
    key_digits.copy_from_slice(digits);
    Some(ParsedPasskey { key_digits, key_start })
}

const EVAL_CHUNK: usize = 8;

/// Fraction of `trials` instances of length `length` whose five answer digits
/// are all predicted. Teacher-forced argmax equals greedy decoding here: both
/// agree as long as every earlier digit was right, and one miss fails the
/// trial either way.
pub fn passkey_accuracy(model: &Model, length: usize, trials: usize, seed: RngSeed) -> Result<f64, TaskError> {
    if trials == 0 {
        return Err(TaskError::Invalid("trials must be >= 1".into()));
    }
    let vocab = model.config().vocab_size;
    let mut rng = seed.derive(length as u64).rng();
    let instances: Vec<PasskeyInstance> = (0..trials)
        .map(|t| {
            let frac: f64 = rng.random();
            gen_passkey(vocab, length, frac, seed.derive(length as u64).derive(t as u64 + 1))
        })
        .collect::<Result<_, _>>()?;
    let mut correct = 0usize;
    for chunk in instances.chunks(EVAL_CHUNK) {
        let inputs: Vec<Vec<usize>> = chunk.iter().map(|p| p.tokens[..length - 1].to_vec()).collect();
        let logits = model.logits(&inputs, 0)?;
        for (b, inst) in chunk.iter().enumerate() {
            let ok = (0..KEY_DIGITS).all(|i| {
                let row = logits.row(b * (length - 1) + inst.answer_span.0 - 1 + i);
                argmax(row) == inst.key_digits[i]
            });
            correct += ok as usize;
        }
    }
    Ok(correct as f64 / trials as f64)
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Passkey accuracy per context length.
pub fn eval_passkey(
    model: &Model,
    context_lengths: &[usize],
    trials: usize,
    seed: RngSeed,
) -> Result<EvalReport, TaskError> {
    let start = Instant::now();
    let rows = context_lengths
        .iter()
        .map(|&length| {
            Ok(EvalRow { length, seed: seed.0, metric: passkey_accuracy(model, length, trials, seed)?, trials })
        })
        .collect::<Result<Vec<_>, TaskError>>()?;
    Ok(EvalReport {
        method: model.config().embedding_kind.label().to_string(),
        metric_name: "passkey_accuracy".into(),
        context_lengths: context_lengths.to_vec(),
        rows,
        wall_clock_secs: start.elapsed().as_secs_f64(),
        note: "sentinel-token passkey format; model trained directly on the task".into(),
    })
}

/// Training batches: each batch has one length drawn from
/// `[min_length, max_length]`; each row is a passkey instance with
/// probability `passkey_fraction`, otherwise a Markov stream scored on every
/// token.
#[derive(Debug)]
pub struct PasskeyMixture {
    pub vocab_size: usize,
    pub min_length: usize,
    pub max_length: usize,
    pub passkey_fraction: f64,
    chain: MarkovChain,
}

impl PasskeyMixture {
    pub fn new(vocab_size: usize, max_length: usize, corpus: &SyntheticCorpusConfig) -> Result<Self, TaskError> {
        if corpus.first_token + corpus.vocab_size > vocab_size {
            return Err(TaskError::Invalid("corpus ids exceed the model vocabulary".into()));
        }
        if max_length < MIN_CONTEXT {
            return Err(TaskError::ContextTooShort(max_length));
        }
        Ok(Self {
            vocab_size,
            min_length: (max_length / 2).max(MIN_CONTEXT),
            max_length,
            passkey_fraction: 0.9,
            chain: MarkovChain::new(corpus)?,
        })
    }

    pub fn batch(&self, batch_size: usize, seed: RngSeed) -> Batch {
        let mut rng = seed.rng();
        let len = rng.random_range(self.min_length..=self.max_length);
        let mut inputs = Vec::with_capacity(batch_size);
        let mut targets = Vec::with_capacity(batch_size);
        for i in 0..batch_size {
            let row_seed = seed.derive(i as u64 + 1);
            if rng.random::<f64>() < self.passkey_fraction {
                let frac: f64 = rng.random();
                let inst = gen_passkey(self.vocab_size, len, frac, row_seed).expect("validated lengths");
                let (x, y) = inst.training_pair();
                inputs.push(x);
                targets.push(y);
            } else {
                let s = self.chain.sample(len, row_seed);
                inputs.push(s[..len - 1].to_vec());
                targets.push(s[1..].to_vec());
            }
        }
        Batch { inputs, targets }
    }
}
