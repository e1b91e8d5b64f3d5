use std::collections::HashMap;
use std::fmt;
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::EnvError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BusMessage {
    pub topic: String,
    pub payload: serde_json::Value,
    pub seq: u64,
}

/// Topics the home publishes on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Topic {
    Property { device: String, name: String },
    Operations { device: String },
    Signals { device: String },
    Goals { agent: String },
}

impl Topic {
    pub fn parse(topic: &str) -> Result<Topic, EnvError> {
        let parts: Vec<&str> = topic.split('/').collect();
        let bad = || EnvError::MalformedTopic(topic.to_string());
        if parts.iter().any(|p| p.is_empty() || p.contains(['+', '#'])) {
            return Err(bad());
        }
        match parts.as_slice() {
            ["devices", id, "properties", name] => Ok(Topic::Property {
                device: id.to_string(),
                name: name.to_string(),
            }),
            ["devices", id, "operations"] => Ok(Topic::Operations { device: id.to_string() }),
            ["devices", id, "signals"] => Ok(Topic::Signals { device: id.to_string() }),
            ["agent", id, "goals"] => Ok(Topic::Goals { agent: id.to_string() }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Topic::Property { device, name } => write!(f, "devices/{device}/properties/{name}"),
            Topic::Operations { device } => write!(f, "devices/{device}/operations"),
            Topic::Signals { device } => write!(f, "devices/{device}/signals"),
            Topic::Goals { agent } => write!(f, "agent/{agent}/goals"),
        }
    }
}

/// Subscription filter with `+` (one level) and `#` (all remaining levels).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pattern(Vec<String>);

impl Pattern {
    pub fn parse(pattern: &str) -> Result<Pattern, EnvError> {
        let levels: Vec<String> = pattern.split('/').map(str::to_string).collect();
        let bad = || EnvError::MalformedPattern(pattern.to_string());
        for (i, l) in levels.iter().enumerate() {
            let wildcard = l == "+" || l == "#";
            if l.is_empty() || (!wildcard && l.contains(['+', '#'])) {
                return Err(bad());
            }
            if l == "#" && i + 1 != levels.len() {
                return Err(bad());
            }
        }
        Ok(Pattern(levels))
    }

    pub fn matches(&self, topic: &str) -> bool {
        let mut levels = topic.split('/');
        for p in &self.0 {
            match p.as_str() {
                "#" => return true,
                "+" => {
                    if levels.next().is_none() {
                        return false;
                    }
                }
                lit => {
                    if levels.next() != Some(lit) {
                        return false;
                    }
                }
            }
        }
        levels.next().is_none()
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join("/"))
    }
}

#[derive(Default)]
struct Inner {
    seqs: HashMap<String, u64>,
    subscribers: Vec<(Vec<Pattern>, Sender<BusMessage>)>,
}

/// In-process publish/subscribe bus. Cloning shares the same bus.
///
/// Sequence numbers start at 1 and grow by one per topic. Publishing holds the
/// bus lock while numbering and fanning out, so every subscriber sees each
/// topic in sequence order even with concurrent publishers.
#[derive(Clone, Default)]
pub struct Bus {
    inner: Arc<Mutex<Inner>>,
}

impl Bus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn publish(&self, topic: &str, payload: serde_json::Value) -> Result<u64, EnvError> {
        Topic::parse(topic)?;
        let mut inner = self.inner.lock().expect("bus lock poisoned");
        let seq = {
            let s = inner.seqs.entry(topic.to_string()).or_insert(0);
            *s += 1;
            *s
        };
        let msg = BusMessage { topic: topic.to_string(), payload, seq };
        // dropped receivers are pruned on the way
        inner
            .subscribers
            .retain(|(ps, tx)| !ps.iter().any(|p| p.matches(topic)) || tx.send(msg.clone()).is_ok());
        Ok(seq)
    }

    pub fn subscribe(&self, pattern: &str) -> Result<Subscription, EnvError> {
        self.subscribe_all(&[pattern])
    }

    /// One queue fed by several patterns; a message matching more than one is
    /// delivered once.
    pub fn subscribe_all(&self, patterns: &[&str]) -> Result<Subscription, EnvError> {
        let ps = patterns.iter().map(|p| Pattern::parse(p)).collect::<Result<Vec<_>, _>>()?;
        let (tx, rx) = channel();
        self.inner.lock().expect("bus lock poisoned").subscribers.push((ps, tx));
        Ok(Subscription { rx })
    }

    /// Last sequence number used on `topic`.
    pub fn last_seq(&self, topic: &str) -> u64 {
        self.inner
            .lock()
            .expect("bus lock poisoned")
            .seqs
            .get(topic)
            .copied()
            .unwrap_or(0)
    }
}

/// Receiving end of a subscription; messages queue until read.
pub struct Subscription {
    rx: Receiver<BusMessage>,
}

impl Subscription {
    pub fn try_recv(&self) -> Option<BusMessage> {
        self.rx.try_recv().ok()
    }

    pub fn recv_timeout(&self, timeout: std::time::Duration) -> Option<BusMessage> {
        self.rx.recv_timeout(timeout).ok()
    }

    pub fn drain(&self) -> Vec<BusMessage> {
        std::iter::from_fn(|| self.try_recv()).collect()
    }
}
