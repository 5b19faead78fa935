use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{BlackBox, Response};
use crate::error::{Error, Result};
use crate::table::Table;

#[derive(Serialize)]
struct Request {
    loss: Vec<Vec<f64>>,
    control: f64,
    seed: u64,
}

#[derive(Deserialize)]
struct Reply {
    #[serde(default)]
    rows: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    samples: Option<Vec<(usize, usize)>>,
    #[serde(default)]
    error: Option<String>,
}

struct Pipe {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

/// A subprocess speaking line-delimited JSON: one request object per line
/// on stdin (`{"loss": [[..]], "control": x, "seed": n}`), one reply per
/// line on stdout (`{"rows": [[..]]}` or `{"samples": [[s, a], ..]}`).
pub struct ExternalBox {
    prior: Vec<f64>,
    n_actions: usize,
    pipe: Mutex<Pipe>,
}

impl ExternalBox {
    pub fn spawn(program: &str, args: &[String], prior: Vec<f64>, n_actions: usize) -> Result<Self> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| Error::BlackBox {
                at: "spawn".into(),
                detail: format!("{program}: {e}"),
            })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(ExternalBox {
            prior,
            n_actions,
            pipe: Mutex::new(Pipe { child, stdin, stdout }),
        })
    }
}

impl Drop for ExternalBox {
    fn drop(&mut self) {
        if let Ok(pipe) = self.pipe.get_mut() {
            let _ = pipe.child.kill();
            let _ = pipe.child.wait();
        }
    }
}

impl BlackBox for ExternalBox {
    fn prior(&self) -> &[f64] {
        &self.prior
    }

    fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn concurrent(&self) -> bool {
        false
    }

    fn respond(&self, loss: &Table<f64>, control: f64, seed: u64) -> Result<Response> {
        let at = format!("control={control}, seed={seed}");
        let fail = |detail: String| Error::BlackBox { at: at.clone(), detail };
        let mut pipe = self.pipe.lock().map_err(|_| fail("pipe lock poisoned".into()))?;
        let request = Request {
            loss: loss.to_rows(),
            control,
            seed,
        };
        let line = serde_json::to_string(&request).map_err(|e| fail(e.to_string()))?;
        writeln!(pipe.stdin, "{line}").map_err(|e| fail(e.to_string()))?;
        pipe.stdin.flush().map_err(|e| fail(e.to_string()))?;
        let mut reply = String::new();
        let n = pipe.stdout.read_line(&mut reply).map_err(|e| fail(e.to_string()))?;
        if n == 0 {
            return Err(fail("box closed its output".into()));
        }
        let reply: Reply = serde_json::from_str(&reply).map_err(|e| fail(format!("bad reply: {e}")))?;
        match (reply.rows, reply.samples, reply.error) {
            (_, _, Some(e)) => Err(fail(e)),
            (Some(rows), None, None) => Ok(Response::Rows(rows)),
            (None, Some(samples), None) => Ok(Response::Samples(samples)),
            _ => Err(fail("reply must carry exactly one of rows or samples".into())),
        }
    }
}
