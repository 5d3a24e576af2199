use std::fmt;

use super::ModelError;

/// Model and training settings. Defaults are the published hyperparameters for English.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub lstm_layers: usize,
    pub word_dim: usize,
    pub pretrained_dim: usize,
    pub pos_dim: usize,
    pub action_dim: usize,
    pub lstm_input_dim: usize,
    pub lstm_hidden_dim: usize,
    pub learning_rate: f64,
    pub learning_rate_decay: f64,
    pub l2: f64,
    pub unk_prob: f64,
    pub seed: u64,
    pub epochs: usize,
    pub patience: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            lstm_layers: 2,
            word_dim: 32,
            pretrained_dim: 100,
            pos_dim: 12,
            action_dim: 16,
            lstm_input_dim: 128,
            lstm_hidden_dim: 128,
            learning_rate: 0.1,
            learning_rate_decay: 0.05,
            l2: 1e-6,
            unk_prob: 0.5,
            seed: 1,
            epochs: 100,
            patience: 20,
        }
    }
}

impl Hyperparams {
    /// Chinese settings differ only in the pretrained embedding size.
    pub fn chinese() -> Self {
        Hyperparams {
            pretrained_dim: 80,
            ..Self::default()
        }
    }

    pub const KEYS: [&'static str; 14] = [
        "lstm_layers",
        "word_dim",
        "pretrained_dim",
        "pos_dim",
        "action_dim",
        "lstm_input_dim",
        "lstm_hidden_dim",
        "learning_rate",
        "learning_rate_decay",
        "l2",
        "unk_prob",
        "seed",
        "epochs",
        "patience",
    ];

    /// Sets one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
            value
                .parse()
                .map_err(|_| format!("invalid value {value:?} for {key}"))
        }
        match key {
            "lstm_layers" => self.lstm_layers = num(key, value)?,
            "word_dim" => self.word_dim = num(key, value)?,
            "pretrained_dim" => self.pretrained_dim = num(key, value)?,
            "pos_dim" => self.pos_dim = num(key, value)?,
            "action_dim" => self.action_dim = num(key, value)?,
            "lstm_input_dim" => self.lstm_input_dim = num(key, value)?,
            "lstm_hidden_dim" => self.lstm_hidden_dim = num(key, value)?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "learning_rate_decay" => self.learning_rate_decay = num(key, value)?,
            "l2" => self.l2 = num(key, value)?,
            "unk_prob" => self.unk_prob = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "patience" => self.patience = num(key, value)?,
            _ => return Err(format!("unknown setting {key:?}")),
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), String> {
        let dims = [
            ("lstm_layers", self.lstm_layers),
            ("word_dim", self.word_dim),
            ("pos_dim", self.pos_dim),
            ("action_dim", self.action_dim),
            ("lstm_input_dim", self.lstm_input_dim),
            ("lstm_hidden_dim", self.lstm_hidden_dim),
        ];
        if let Some((key, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(format!("{key} must be positive"));
        }
        if !(0.0..=1.0).contains(&self.unk_prob) {
            return Err(format!("unk_prob {} is not a probability", self.unk_prob));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate_decay >= 0.0 && self.l2 >= 0.0) {
            return Err(
                "learning_rate must be positive, learning_rate_decay and l2 non-negative".into(),
            );
        }
        Ok(())
    }

    /// Parses a config file of `key=value` lines on top of `self`. `#` starts a comment.
    pub fn parse_config(mut self, text: &str) -> Result<Self, ModelError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| ModelError::Config {
                line: i + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, found {line:?}")))?;
            self.set(key.trim(), value.trim()).map_err(err)?;
        }
        Ok(self)
    }
}

/// Writes the settings in config-file syntax, one per line, in [`Hyperparams::KEYS`] order.
impl fmt::Display for Hyperparams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "lstm_layers={}", self.lstm_layers)?;
        writeln!(f, "word_dim={}", self.word_dim)?;
        writeln!(f, "pretrained_dim={}", self.pretrained_dim)?;
        writeln!(f, "pos_dim={}", self.pos_dim)?;
        writeln!(f, "action_dim={}", self.action_dim)?;
        writeln!(f, "lstm_input_dim={}", self.lstm_input_dim)?;
        writeln!(f, "lstm_hidden_dim={}", self.lstm_hidden_dim)?;
        // `{:?}` prints the shortest string that parses back to the same f64.
        writeln!(f, "learning_rate={:?}", self.learning_rate)?;
        writeln!(f, "learning_rate_decay={:?}", self.learning_rate_decay)?;
        writeln!(f, "l2={:?}", self.l2)?;
        writeln!(f, "unk_prob={:?}", self.unk_prob)?;
        writeln!(f, "seed={}", self.seed)?;
        writeln!(f, "epochs={}", self.epochs)?;
        writeln!(f, "patience={}", self.patience)
    }
}
