// Runs the quick examples in-process so they stay compiling and working.

macro_rules! example {
    ($name:ident) => {
        #[allow(dead_code)]
        mod $name {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", stringify!($name), ".rs"));
        }
    };
}

example!(nudft_roundtrip);
example!(truncation_spectrum);
example!(harmonic_expansion);
example!(undertrained_dims);
example!(rope_vs_fope);
example!(periodic_extension);
example!(toy_attention);
example!(autodiff_gradcheck);
example!(markov_corpus);
example!(alibi_bias);
example!(train_copy_task);
example!(passkey_task);
example!(checkpoint_resume);
example!(qk_probe);

#[test]
fn spectral_examples_run() {
    nudft_roundtrip::main().unwrap();
    truncation_spectrum::main().unwrap();
    harmonic_expansion::main().unwrap();
    undertrained_dims::main().unwrap();
    periodic_extension::main().unwrap();
}

#[test]
fn embedding_examples_run() {
    rope_vs_fope::main().unwrap();
    alibi_bias::main().unwrap();
    toy_attention::main().unwrap();
}

#[test]
fn autodiff_example_runs() {
    autodiff_gradcheck::main().unwrap();
}

#[test]
fn task_examples_run() {
    markov_corpus::main().unwrap();
    passkey_task::main().unwrap();
}

#[test]
fn training_examples_run() {
    train_copy_task::run(20).unwrap();
    checkpoint_resume::main().unwrap();
    qk_probe::run(5).unwrap();
}
