use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::decode::parse_greedy;
use crate::eval::{EvalConfig, EvalReport};
use crate::nn::{Gradients, Graph, Sgd};
use crate::transition::{execute, oracle, Action, OracleConfig, ParserState, System};
use crate::treebank::{HeadRules, Token, Tree};

use super::{Encoder, Hyperparams, Model, ModelError, Pretrained, Vocabulary, WordIds};

#[derive(Debug, Clone)]
pub struct SentenceLoss {
    /// `−Σ log p(gold action)` over the derivation.
    pub loss: f64,
    pub grads: Gradients,
}

/// Negative log-likelihood of the gold derivation and its gradient. Steps with a single
/// legal action contribute nothing and are not scored.
pub fn sentence_loss(
    model: &Model,
    words: &[WordIds],
    gold: &[Action],
) -> Result<SentenceLoss, ModelError> {
    let ts = model.transitions();
    let mut g = Graph::new(model.store());
    let mut encoder = Encoder::new(model, &mut g, words)?;
    let mut state = ParserState::start(words.len());
    let mut terms = Vec::new();
    for (step, action) in gold.iter().enumerate() {
        let illegal = |reason: String| ModelError::GoldIllegal {
            step,
            action: action.to_string(),
            reason,
        };
        let id = model
            .action_id(action)
            .ok_or_else(|| illegal("not in the action inventory".into()))?;
        ts.check(&state, action)
            .map_err(|e| illegal(e.to_string()))?;
        let legal = ts.legal_ids(&state);
        if legal.len() > 1 {
            let k = legal.binary_search(&id).expect("checked actions are legal");
            let lp = model.action_log_probs(&mut g, &encoder.encoded(), &legal);
            terms.push(g.pick(lp, k));
        }
        ts.apply_in_place(&mut state, action)?;
        encoder.apply(&mut g, id)?;
    }
    if !state.is_finished() {
        return Err(ModelError::GoldIllegal {
            step: gold.len(),
            action: "(end)".into(),
            reason: "derivation does not reach a final state".into(),
        });
    }
    if terms.is_empty() {
        return Ok(SentenceLoss {
            loss: 0.0,
            grads: Gradients::new(model.store().len()),
        });
    }
    let total = g.sum_all(&terms);
    let loss = g.neg(total);
    let value = g.scalar(loss);
    let grads = g.backward(loss)?;
    Ok(SentenceLoss { loss: value, grads })
}

#[derive(Debug, Clone)]
pub struct TrainOptions<'a> {
    pub hyper: Hyperparams,
    pub rules: &'a HeadRules,
    pub dev: Option<&'a [(Tree, Vec<Token>)]>,
    pub pretrained: Option<&'a Pretrained>,
    pub eval: EvalConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    /// One-based.
    pub epoch: usize,
    /// Summed training loss over the epoch.
    pub loss: f64,
    pub learning_rate: f64,
    /// Dev LR, LP, F1 after the epoch.
    pub dev: Option<(f64, f64, f64)>,
    /// Whether this epoch produced the kept model.
    pub best: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub log: Vec<EpochLog>,
    /// Training sentences dropped because their gold derivation is not executable.
    pub skipped: Vec<usize>,
}

/// Greedy-parses `dev` and scores it.
pub fn evaluate(model: &Model, dev: &[(Tree, Vec<Token>)], config: &EvalConfig) -> EvalReport {
    dev.iter()
        .map(|(gold, tokens)| match parse_greedy(model, tokens) {
            Ok(d) => EvalReport::sentence(gold, &d.tree, tokens, config),
            Err(_) => EvalReport::unparsed(gold, tokens, config),
        })
        .fold(EvalReport::default(), EvalReport::merge)
}

/// Per-sentence SGD over shuffled epochs. With a dev set the model with the best dev F1 is
/// kept, training stops after `patience` epochs without improvement or once dev F1 is
/// 100; without one the last model is kept.
pub fn train(
    corpus: &[(Tree, Vec<Token>)],
    system: System,
    options: &TrainOptions,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome, ModelError> {
    let hyper = &options.hyper;
    let config = OracleConfig::new(system);
    let mut examples = Vec::new();
    let mut skipped = Vec::new();
    for (i, (tree, tokens)) in corpus.iter().enumerate() {
        match oracle(tree, tokens, &config, options.rules) {
            Ok(actions) if execute(&actions, tokens.len(), system).is_ok() => {
                examples.push((i, actions))
            }
            _ => skipped.push(i),
        }
    }
    if examples.is_empty() {
        return Err(ModelError::EmptyCorpus);
    }

    let pretrained_words = options
        .pretrained
        .map(|p| p.words.clone())
        .unwrap_or_default();
    let vocab = Vocabulary::build(corpus, system, pretrained_words)?;
    let mut init_rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut model = Model::new(
        system,
        hyper.clone(),
        vocab,
        options.pretrained,
        &mut init_rng,
    )?;
    let examples: Vec<(Vec<WordIds>, Vec<Action>)> = examples
        .into_iter()
        .map(|(i, actions)| {
            let words = corpus[i]
                .1
                .iter()
                .map(|t| model.vocab().word_ids(t))
                .collect();
            (words, actions)
        })
        .collect();

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    shuffle_rng.set_stream(1);
    let mut unk_rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    unk_rng.set_stream(2);
    let sgd = Sgd {
        eta0: hyper.learning_rate,
        decay: hyper.learning_rate_decay,
        lambda: hyper.l2,
    };

    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut log = Vec::new();
    let mut best: Option<(f64, Model)> = None;
    let mut stale = 0;
    for epoch in 0..hyper.epochs {
        order.shuffle(&mut shuffle_rng);
        let lr = sgd.learning_rate(epoch);
        let mut total = 0.0;
        for &i in &order {
            let (words, actions) = &examples[i];
            let mut words = words.clone();
            if hyper.unk_prob > 0.0 {
                for w in &mut words {
                    if model.vocab().is_singleton(w.word) && unk_rng.gen_bool(hyper.unk_prob) {
                        w.word = 0;
                    }
                }
            }
            let step = sentence_loss(&model, &words, actions)?;
            total += step.loss;
            sgd.update(model.store_mut(), &step.grads, lr)?;
        }

        let dev = options.dev.map(|dev| evaluate(&model, dev, &options.eval));
        let improved = match (&dev, &best) {
            (None, _) => true,
            (Some(r), Some((f1, _))) => r.f1() > *f1,
            (Some(_), None) => true,
        };
        if let Some(r) = &dev {
            if improved {
                best = Some((r.f1(), model.clone()));
                stale = 0;
            } else {
                stale += 1;
            }
        }
        let entry = EpochLog {
            epoch: epoch + 1,
            loss: total,
            learning_rate: lr,
            dev: dev.as_ref().map(|r| (r.lr(), r.lp(), r.f1())),
            best: improved,
        };
        on_epoch(&entry);
        log.push(entry);
        if let Some(r) = &dev {
            if r.f1() >= 100.0 || stale >= hyper.patience {
                break;
            }
        }
    }
    let model = match best {
        Some((_, m)) => m,
        None => model,
    };
    Ok(TrainOutcome {
        model,
        log,
        skipped,
    })
}
