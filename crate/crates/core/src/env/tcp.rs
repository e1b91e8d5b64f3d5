//! Newline-delimited JSON bridge that exposes a [`Bus`] to other processes.
//!
//! Client frames are `{"sub": "<pattern>"}` or `{"t": "<topic>", "p": <payload>}`;
//! the bridge answers with `{"t": "<topic>", "p": <payload>, "seq": <n>}` for every
//! message matching one of the client's subscriptions.

use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::bus::{Bus, BusMessage};
use super::EnvError;

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ClientFrame {
    Sub { sub: String },
    Pub { t: String, p: serde_json::Value },
}

#[derive(Serialize, Deserialize)]
struct Frame {
    t: String,
    p: serde_json::Value,
    seq: u64,
}

pub struct TcpBridge {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    accept: Option<JoinHandle<()>>,
}

impl TcpBridge {
    /// Listens on `127.0.0.1:port`; port 0 picks a free one.
    pub fn start(bus: Bus, port: u16) -> Result<Self, EnvError> {
        let listener = TcpListener::bind(("127.0.0.1", port)).map_err(|e| EnvError::Io(e.to_string()))?;
        let addr = listener.local_addr().map_err(|e| EnvError::Io(e.to_string()))?;
        let stop = Arc::new(AtomicBool::new(false));
        let stop_accept = stop.clone();
        let accept = thread::spawn(move || {
            for conn in listener.incoming() {
                if stop_accept.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = conn else { continue };
                let bus = bus.clone();
                let stop = stop_accept.clone();
                thread::spawn(move || serve(stream, bus, stop));
            }
        });
        Ok(TcpBridge { addr, stop, accept: Some(accept) })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }
}

impl Drop for TcpBridge {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // wake the accept loop
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

fn serve(stream: TcpStream, bus: Bus, stop: Arc<AtomicBool>) {
    let Ok(write_half) = stream.try_clone() else { return };
    let writer = Arc::new(Mutex::new(write_half));
    let reader = BufReader::new(stream);
    for line in reader.lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        let reply = match serde_json::from_str::<ClientFrame>(&line) {
            Ok(ClientFrame::Sub { sub }) => match bus.subscribe(&sub) {
                Ok(subscription) => {
                    let writer = writer.clone();
                    let stop = stop.clone();
                    thread::spawn(move || loop {
                        if stop.load(Ordering::SeqCst) {
                            break;
                        }
                        let Some(m) = subscription.recv_timeout(Duration::from_millis(50)) else {
                            continue;
                        };
                        let frame = Frame { t: m.topic, p: m.payload, seq: m.seq };
                        let mut text = serde_json::to_string(&frame).expect("frames serialize");
                        text.push('\n');
                        if writer.lock().expect("writer lock").write_all(text.as_bytes()).is_err() {
                            break;
                        }
                    });
                    None
                }
                Err(e) => Some(e.to_string()),
            },
            Ok(ClientFrame::Pub { t, p }) => bus.publish(&t, p).err().map(|e| e.to_string()),
            Err(e) => Some(format!("bad frame: {e}")),
        };
        if let Some(err) = reply {
            let text = format!("{}\n", serde_json::json!({ "err": err }));
            if writer.lock().expect("writer lock").write_all(text.as_bytes()).is_err() {
                break;
            }
        }
    }
}

/// Client side of the bridge.
pub struct TcpClient {
    stream: TcpStream,
    reader: BufReader<TcpStream>,
}

impl TcpClient {
    pub fn connect(addr: SocketAddr) -> Result<Self, EnvError> {
        let stream = TcpStream::connect(addr).map_err(|e| EnvError::Io(e.to_string()))?;
        let reader = BufReader::new(stream.try_clone().map_err(|e| EnvError::Io(e.to_string()))?);
        Ok(TcpClient { stream, reader })
    }

    fn send(&mut self, value: serde_json::Value) -> Result<(), EnvError> {
        let text = format!("{value}\n");
        self.stream.write_all(text.as_bytes()).map_err(|e| EnvError::Io(e.to_string()))
    }

    pub fn subscribe(&mut self, pattern: &str) -> Result<(), EnvError> {
        self.send(serde_json::json!({ "sub": pattern }))
    }

    pub fn publish(&mut self, topic: &str, payload: serde_json::Value) -> Result<(), EnvError> {
        self.send(serde_json::json!({ "t": topic, "p": payload }))
    }

    /// Next message frame; error frames from the bridge are returned as `Err`.
    pub fn recv(&mut self, timeout: Duration) -> Result<BusMessage, EnvError> {
        self.stream
            .set_read_timeout(Some(timeout))
            .map_err(|e| EnvError::Io(e.to_string()))?;
        let mut line = String::new();
        self.reader.read_line(&mut line).map_err(|e| EnvError::Io(e.to_string()))?;
        if line.is_empty() {
            return Err(EnvError::Io("connection closed".into()));
        }
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| EnvError::Io(e.to_string()))?;
        if let Some(err) = value.get("err") {
            return Err(EnvError::Io(err.to_string()));
        }
        let f: Frame = serde_json::from_value(value).map_err(|e| EnvError::Io(e.to_string()))?;
        Ok(BusMessage { topic: f.t, payload: f.p, seq: f.seq })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn remote_subscriber_sees_local_publish() {
        let bus = Bus::new();
        let bridge = TcpBridge::start(bus.clone(), 0).unwrap();
        let mut client = TcpClient::connect(bridge.local_addr()).unwrap();
        client.subscribe("devices/+/properties/#").unwrap();
        // the subscription is registered asynchronously
        let mut got = None;
        for _ in 0..100 {
            bus.publish("devices/tv/properties/status", json!({"value": "standby"})).unwrap();
            if let Ok(m) = client.recv(Duration::from_millis(20)) {
                got = Some(m);
                break;
            }
        }
        let m = got.expect("frame received");
        assert_eq!(m.topic, "devices/tv/properties/status");
        assert_eq!(m.payload["value"], "standby");
    }

    #[test]
    fn remote_publish_reaches_local_subscriber() {
        let bus = Bus::new();
        let sub = bus.subscribe("agent/a1/goals").unwrap();
        let bridge = TcpBridge::start(bus.clone(), 0).unwrap();
        let mut client = TcpClient::connect(bridge.local_addr()).unwrap();
        client.publish("agent/a1/goals", json!({"goal": "watch(tv, canalplus)"})).unwrap();
        let m = sub.recv_timeout(Duration::from_secs(2)).expect("delivered");
        assert_eq!(m.seq, 1);
        client.publish("not/a/topic/at/all", json!(null)).unwrap();
        assert!(client.recv(Duration::from_secs(2)).is_err());
    }
}
