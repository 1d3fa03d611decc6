//! Real-mode telemetry over HTTP: one GET per endpoint returning a flat JSON
//! metric document.

use std::collections::BTreeMap;
use std::time::Duration;

use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{FaultScenario, SimSource, TelemetrySource};
use crate::devices::sim::time_of_day;
use crate::telemetry::{DeviceType, Metric, Reading, TelemetrySnapshot};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Auth {
    None,
    Bearer { token: String },
    Basic { user: String, password: String },
    ApiKey { header: String, key: String },
}

impl Auth {
    fn header(&self) -> Option<(String, String)> {
        match self {
            Auth::None => None,
            Auth::Bearer { token } => Some(("Authorization".into(), format!("Bearer {token}"))),
            Auth::Basic { user, password } => {
                let enc = base64::engine::general_purpose::STANDARD.encode(format!("{user}:{password}"));
                Some(("Authorization".into(), format!("Basic {enc}")))
            }
            Auth::ApiKey { header, key } => Some((header.clone(), key.clone())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpEndpoint {
    pub device_id: String,
    pub room: String,
    pub device_type: DeviceType,
    pub url: String,
    pub auth: Auth,
}

/// Maps a metric document onto a reading. Unknown keys are ignored.
pub fn reading_from_document(ep: &HttpEndpoint, doc: &Value) -> Reading {
    let mut r = Reading::new(&ep.device_id, &ep.room, ep.device_type);
    for m in Metric::ALL {
        *r.metric_mut(m) = doc.get(m.as_str()).and_then(Value::as_f64);
    }
    r.motion = doc.get("motion").and_then(Value::as_bool);
    r.lock_state = doc.get("lock_state").and_then(Value::as_str).map(str::to_owned);
    r.error_flag = doc.get("error_flag").and_then(Value::as_bool).unwrap_or(false);
    r
}

pub struct HttpSource {
    endpoints: Vec<HttpEndpoint>,
    last: BTreeMap<String, Reading>,
    agent: ureq::Agent,
}

impl HttpSource {
    pub fn new(endpoints: Vec<HttpEndpoint>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self {
            endpoints,
            last: BTreeMap::new(),
            agent,
        }
    }

    fn fetch(&self, ep: &HttpEndpoint) -> Result<Value, ureq::Error> {
        let mut req = self.agent.get(&ep.url);
        if let Some((k, v)) = ep.auth.header() {
            req = req.header(k, v);
        }
        req.call()?.body_mut().read_json::<Value>()
    }

    /// Readings for every endpoint. A failed fetch yields the last good
    /// values (or an empty reading) marked stale.
    pub fn poll_readings(&mut self) -> BTreeMap<String, Reading> {
        let mut out = BTreeMap::new();
        for ep in &self.endpoints {
            let r = match self.fetch(ep) {
                Ok(doc) => {
                    let r = reading_from_document(ep, &doc);
                    self.last.insert(ep.device_id.clone(), r.clone());
                    r
                }
                Err(_) => {
                    let mut r = self
                        .last
                        .get(&ep.device_id)
                        .cloned()
                        .unwrap_or_else(|| Reading::new(&ep.device_id, &ep.room, ep.device_type));
                    r.stale = true;
                    r
                }
            };
            out.insert(ep.device_id.clone(), r);
        }
        out
    }
}

impl TelemetrySource for HttpSource {
    fn poll(&mut self, cycle: u64, tick: u64, _faults: &[FaultScenario]) -> TelemetrySnapshot {
        TelemetrySnapshot {
            cycle,
            tick,
            time_of_day_min: time_of_day(tick),
            readings: self.poll_readings(),
        }
    }

    fn accepts_faults(&self) -> bool {
        false
    }
}

/// Simulated home with real endpoints overlaid on matching device ids.
pub struct HybridSource {
    sim: SimSource,
    http: HttpSource,
}

impl HybridSource {
    pub fn new(sim: SimSource, http: HttpSource) -> Self {
        Self { sim, http }
    }
}

impl TelemetrySource for HybridSource {
    fn poll(&mut self, cycle: u64, tick: u64, faults: &[FaultScenario]) -> TelemetrySnapshot {
        let mut snap = self.sim.poll(cycle, tick, faults);
        snap.readings.extend(self.http.poll_readings());
        snap
    }

    fn accepts_faults(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use std::io::{BufRead, BufReader, Write};
    use std::net::TcpListener;
    use std::thread;

    use super::*;

    /// Serves `n` requests; 200 with `body` when the expected header is
    /// present, 401 otherwise.
    fn serve(n: usize, expect: (&'static str, String), body: &'static str) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        thread::spawn(move || {
            for stream in listener.incoming().take(n) {
                let mut stream = stream.unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut authorized = false;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap() == 0 || line == "\r\n" {
                        break;
                    }
                    if let Some((k, v)) = line.trim_end().split_once(": ") {
                        authorized |= k.eq_ignore_ascii_case(expect.0) && v == expect.1;
                    }
                }
                let (status, body) = if authorized {
                    ("200 OK", body)
                } else {
                    ("401 Unauthorized", "{}")
                };
                let resp = format!(
                    "HTTP/1.1 {status}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                );
                stream.write_all(resp.as_bytes()).unwrap();
            }
        });
        format!("http://{addr}/telemetry")
    }

    fn endpoint(url: String, auth: Auth) -> HttpEndpoint {
        HttpEndpoint {
            device_id: "hvac-living_room".into(),
            room: "living_room".into(),
            device_type: DeviceType::Hvac,
            url,
            auth,
        }
    }

    #[test]
    fn bearer_passthrough_then_stale_on_401() {
        let url = serve(2, ("authorization", "Bearer good".into()), r#"{"temperature_c": 21}"#);
        let mut src = HttpSource::new(
            vec![endpoint(url.clone(), Auth::Bearer { token: "good".into() })],
            Duration::from_secs(5),
        );
        let snap = src.poll(1, 0, &[]);
        let r = snap.get("hvac-living_room").unwrap();
        assert_eq!(r.temperature_c, Some(21.0));
        assert!(!r.stale);

        src.endpoints[0].auth = Auth::Bearer { token: "bad".into() };
        let r = src.poll(1, 1, &[]).readings.remove("hvac-living_room").unwrap();
        assert!(r.stale);
        assert_eq!(r.temperature_c, Some(21.0));
    }

    #[test]
    fn basic_and_api_key_headers() {
        let url = serve(1, ("authorization", "Basic dXNlcjpwYXNz".into()), r#"{"power_w": 10}"#);
        let auth = Auth::Basic {
            user: "user".into(),
            password: "pass".into(),
        };
        let mut src = HttpSource::new(vec![endpoint(url, auth)], Duration::from_secs(5));
        assert_eq!(src.poll_readings()["hvac-living_room"].power_w, Some(10.0));

        let url = serve(1, ("x-api-key", "k1".into()), r#"{"motion": true}"#);
        let auth = Auth::ApiKey {
            header: "X-Api-Key".into(),
            key: "k1".into(),
        };
        let mut src = HttpSource::new(vec![endpoint(url, auth)], Duration::from_secs(5));
        assert_eq!(src.poll_readings()["hvac-living_room"].motion, Some(true));
    }

    #[test]
    fn unreachable_endpoint_is_stale() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/x", listener.local_addr().unwrap());
        drop(listener);
        let mut src = HttpSource::new(vec![endpoint(url, Auth::None)], Duration::from_secs(2));
        let r = &src.poll_readings()["hvac-living_room"];
        assert!(r.stale);
        assert_eq!(r.temperature_c, None);
    }
}
