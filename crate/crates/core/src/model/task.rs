use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{encode_amplitude, encode_phase, Channel, ComplexGrid, Image};

use super::detector::DetectorLayout;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetId {
    Mnist,
    FashionMnist,
    Custom,
}

/// How image pixels are written onto the input field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Encoding {
    Amplitude,
    Phase { max_phase: f64 },
}

impl Default for Encoding {
    fn default() -> Self {
        Encoding::Phase { max_phase: PI }
    }
}

impl Encoding {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Encoding::Amplitude => Ok(()),
            Encoding::Phase { max_phase } if max_phase > 0.0 && max_phase <= TAU => Ok(()),
            Encoding::Phase { .. } => Err(Error::config("max_phase", "must lie in (0, 2π]")),
        }
    }

    pub fn encode(&self, image: &Image, pitch: f64) -> Result<ComplexGrid> {
        match *self {
            Encoding::Amplitude => encode_amplitude(image, pitch),
            Encoding::Phase { max_phase } => encode_phase(image, pitch, max_phase),
        }
    }
}

/// A classification task served by one polarization channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelTask {
    pub channel: Channel,
    pub dataset: DatasetId,
    pub encoding: Encoding,
    pub detector: DetectorLayout,
}

impl ChannelTask {
    pub fn validate(&self, n: usize) -> Result<()> {
        self.encoding.validate()?;
        self.detector.validate()?;
        if self.detector.n() != n {
            return Err(Error::config(
                "detector",
                format!("layout is for n = {}, model has n = {n}", self.detector.n()),
            ));
        }
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.detector.classes()
    }
}

/// Rejects empty, oversized or channel-sharing task lists.
pub fn validate_tasks(tasks: &[ChannelTask], n: usize) -> Result<()> {
    if tasks.is_empty() || tasks.len() > 2 {
        return Err(Error::config("tasks", "need one or two channel tasks"));
    }
    if tasks.len() == 2 && tasks[0].channel == tasks[1].channel {
        return Err(Error::config(
            "tasks",
            format!("both tasks use the {} channel", tasks[0].channel),
        ));
    }
    for (i, t) in tasks.iter().enumerate() {
        t.validate(n).map_err(|e| e.within(&format!("tasks[{i}]")))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn task(channel: Channel) -> ChannelTask {
        ChannelTask {
            channel,
            dataset: DatasetId::Mnist,
            encoding: Encoding::default(),
            detector: DetectorLayout::standard(28, 10, 0.8).unwrap(),
        }
    }

    #[test]
    fn encoding_serde_shape() {
        let s = serde_json::to_string(&Encoding::Phase { max_phase: 1.5 }).unwrap();
        assert_eq!(s, r#"{"kind":"phase","max_phase":1.5}"#);
        let a: Encoding = serde_json::from_str(r#"{"kind":"amplitude"}"#).unwrap();
        assert_eq!(a, Encoding::Amplitude);
        let d: DatasetId = serde_json::from_str(r#""fashion-mnist""#).unwrap();
        assert_eq!(d, DatasetId::FashionMnist);
    }

    #[test]
    fn task_lists() {
        assert!(validate_tasks(&[task(Channel::X)], 28).is_ok());
        assert!(validate_tasks(&[task(Channel::X), task(Channel::Y)], 28).is_ok());
        assert!(validate_tasks(&[task(Channel::X), task(Channel::X)], 28).is_err());
        assert!(validate_tasks(&[], 28).is_err());
        assert!(validate_tasks(&[task(Channel::X)], 16).is_err());
        let mut bad = task(Channel::Y);
        bad.encoding = Encoding::Phase { max_phase: 7.0 };
        match validate_tasks(&[bad], 28) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "tasks[0].max_phase"),
            other => panic!("{other:?}"),
        }
    }
}
