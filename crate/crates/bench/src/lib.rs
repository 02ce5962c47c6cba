//! Fixtures shared by the benchmarks: a planted-topic corpus of the size
//! used in the time-ordering experiments and a model sized for it.

use fedtopic::synthetic::{generate, SyntheticSpec};
use fedtopic::{Corpus, ModelConfig, ModelParams};

pub struct Fixture {
    pub corpus: Corpus,
    pub config: ModelConfig,
    pub params: ModelParams,
}

pub fn fixture(hidden: usize) -> Fixture {
    let corpus = generate(&SyntheticSpec::new(2000, 200, 5, 7)).expect("valid synthetic spec");
    let mut config = ModelConfig::new(corpus.vocab().len(), 5);
    config.hidden_sizes = vec![hidden, hidden];
    let params = ModelParams::init(&config, 7).expect("valid model config");
    Fixture { corpus, config, params }
}
