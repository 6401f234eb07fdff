use crate::data::RhythmClass;
use crate::error::{Error, Result};

/// Architecture ledger of the residual network.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NetworkConfig {
    pub residual_blocks: usize,
    pub convs_per_block: usize,
    pub filter_len: usize,
    pub base_filters: usize,
    /// Width grows by `base_filters` every this many blocks.
    pub widen_every: usize,
    /// Every this-many-th block halves the time axis.
    pub subsample_every: usize,
    pub dropout_rate: f64,
    pub class_count: usize,
    pub input_hz: u32,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            residual_blocks: 16,
            convs_per_block: 2,
            filter_len: 16,
            base_filters: 64,
            widen_every: 4,
            subsample_every: 2,
            dropout_rate: 0.2,
            class_count: 14,
            input_hz: 200,
        }
    }
}

const HEADER: &str = "ecgnet-network-config";

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("convs_per_block", self.convs_per_block),
            ("filter_len", self.filter_len),
            ("base_filters", self.base_filters),
            ("widen_every", self.widen_every),
            ("subsample_every", self.subsample_every),
            ("input_hz", self.input_hz as usize),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be >= 1")));
            }
        }
        if !self.residual_blocks.is_multiple_of(self.widen_every) {
            return Err(Error::Config(format!(
                "residual_blocks ({}) must be divisible by widen_every ({})",
                self.residual_blocks, self.widen_every
            )));
        }
        if !self.residual_blocks.is_multiple_of(self.subsample_every) {
            return Err(Error::Config(format!(
                "residual_blocks ({}) must be divisible by subsample_every ({})",
                self.residual_blocks, self.subsample_every
            )));
        }
        if self.subsampling_stages() >= usize::BITS as usize {
            return Err(Error::Config("too many subsampling stages".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout_rate must lie in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if self.class_count < 2 {
            return Err(Error::Config("class_count must be >= 2".into()));
        }
        Ok(())
    }

    pub fn subsampling_stages(&self) -> usize {
        self.residual_blocks / self.subsample_every.max(1)
    }

    /// Input samples per output position.
    pub fn output_stride(&self) -> usize {
        1 << self.subsampling_stages()
    }

    pub fn block_channels(&self, block: usize) -> usize {
        self.base_filters * (1 + block / self.widen_every)
    }

    pub fn block_subsamples(&self, block: usize) -> bool {
        (block + 1).is_multiple_of(self.subsample_every)
    }

    pub fn channel_schedule(&self) -> Vec<usize> {
        (0..self.residual_blocks).map(|i| self.block_channels(i)).collect()
    }

    pub fn conv_layer_count(&self) -> usize {
        self.residual_blocks * self.convs_per_block + 1
    }

    /// Canonical `key=value` text stored in checkpoint headers.
    pub fn to_text(&self) -> String {
        let classes: Vec<&str> = RhythmClass::ALL.iter().map(|c| c.name()).collect();
        format!(
            "{HEADER}\nresidual_blocks={}\nconvs_per_block={}\nfilter_len={}\nbase_filters={}\nwiden_every={}\n\
             subsample_every={}\ndropout_rate={}\nclass_count={}\ninput_hz={}\nclasses={}\n",
            self.residual_blocks,
            self.convs_per_block,
            self.filter_len,
            self.base_filters,
            self.widen_every,
            self.subsample_every,
            self.dropout_rate,
            self.class_count,
            self.input_hz,
            classes.join(",")
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(HEADER) {
            return Err(Error::Config("network config text lacks its header line".into()));
        }
        let mut fields = std::collections::BTreeMap::new();
        for line in lines.filter(|l| !l.is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("malformed config line `{line}`")))?;
            if fields.insert(k, v).is_some() {
                return Err(Error::Config(format!("duplicate config key `{k}`")));
            }
        }
        let mut take = |key: &str| {
            fields
                .remove(key)
                .ok_or_else(|| Error::Config(format!("config is missing `{key}`")))
        };
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("bad value `{v}` for `{key}`")))
        }
        let config = NetworkConfig {
            residual_blocks: num("residual_blocks", take("residual_blocks")?)?,
            convs_per_block: num("convs_per_block", take("convs_per_block")?)?,
            filter_len: num("filter_len", take("filter_len")?)?,
            base_filters: num("base_filters", take("base_filters")?)?,
            widen_every: num("widen_every", take("widen_every")?)?,
            subsample_every: num("subsample_every", take("subsample_every")?)?,
            dropout_rate: num("dropout_rate", take("dropout_rate")?)?,
            class_count: num("class_count", take("class_count")?)?,
            input_hz: num("input_hz", take("input_hz")?)?,
        };
        let classes = take("classes")?;
        let expected: Vec<&str> = RhythmClass::ALL.iter().map(|c| c.name()).collect();
        if classes != expected.join(",") {
            return Err(Error::Config(format!(
                "class ordering `{classes}` does not match this build"
            )));
        }
        if let Some(k) = fields.keys().next() {
            return Err(Error::Config(format!("unknown config key `{k}`")));
        }
        config.validate()?;
        Ok(config)
    }
}
