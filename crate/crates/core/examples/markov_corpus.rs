// Usage: cargo run --release --example markov_corpus
//
// The seeded Markov language used for perplexity: its entropy rate bounds
// the best achievable perplexity, and temperature controls how predictable
// it is.

use anyhow::Result;

use fope::numerics::RngSeed;
use fope::tasks::{MarkovChain, SyntheticCorpusConfig};

pub fn main() -> Result<()> {
    for temperature in [0.5, 1.0, 4.0] {
        let config = SyntheticCorpusConfig { temperature, ..Default::default() };
        let chain = MarkovChain::new(&config)?;
        let stream = chain.sample(20_000, RngSeed(1));
        let first = config.first_token;
        // empirical entropy rate from the chain's own probabilities
        let nats: f64 = stream
            .windows(2)
            .map(|w| -chain.probabilities(&[w[0] - first])[w[1] - first].ln())
            .sum::<f64>()
            / (stream.len() - 1) as f64;
        println!(
            "temperature {temperature}: entropy {nats:.3} nats/token, perplexity floor {:.2} (uniform would be {})",
            nats.exp(),
            config.vocab_size
        );
    }
    let chain = MarkovChain::new(&SyntheticCorpusConfig::default())?;
    println!("first tokens of a default stream: {:?}", &chain.sample(16, RngSeed(2)));
    Ok(())
}
