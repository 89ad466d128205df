//! Run reports: `key: value` text or JSON, with an inputs digest.

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

pub struct Report {
    subcommand: String,
    digest: Sha256,
    seed: u64,
    fields: Map<String, Value>,
}

impl Report {
    pub fn new(subcommand: &str, seed: u64) -> Report {
        let mut digest = Sha256::new();
        digest.update(subcommand.as_bytes());
        Report { subcommand: subcommand.to_string(), digest, seed, fields: Map::new() }
    }

    /// Feed an input (argument value or file contents) into the digest.
    pub fn input(&mut self, name: &str, bytes: &[u8]) {
        self.digest.update([0u8]);
        self.digest.update(name.as_bytes());
        self.digest.update([0u8]);
        self.digest.update((bytes.len() as u64).to_le_bytes());
        self.digest.update(bytes);
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("report values serialize");
        self.fields.insert(key.to_string(), v);
    }

    pub fn render(self, json: bool) -> String {
        let digest = hex::encode(self.digest.finalize());
        if json {
            let mut top = Map::new();
            top.insert("subcommand".into(), Value::String(self.subcommand));
            top.insert("inputs_digest".into(), Value::String(digest));
            top.insert("seed".into(), Value::from(self.seed));
            top.insert("results".into(), Value::Object(self.fields));
            let mut s = serde_json::to_string_pretty(&Value::Object(top)).expect("json");
            s.push('\n');
            return s;
        }
        let mut out = format!("subcommand: {}\ninputs_digest: {digest}\nseed: {}\n", self.subcommand, self.seed);
        for (k, v) in &self.fields {
            flatten(k, v, &mut out);
        }
        out
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut String) {
    match v {
        Value::Object(m) if !m.is_empty() => {
            for (k, x) in m {
                flatten(&format!("{prefix}.{k}"), x, out);
            }
        }
        Value::String(s) => out.push_str(&format!("{prefix}: {s}\n")),
        Value::Null => out.push_str(&format!("{prefix}: none\n")),
        other => out.push_str(&format!("{prefix}: {other}\n")),
    }
}
