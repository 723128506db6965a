//! External objectives: a persistent child process that reads one point per
//! line (space-separated coordinates) on stdin and answers with one number
//! per line on stdout. The child is spawned once and killed on drop.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc;
use std::time::Duration;

use hei_core::{Error, Objective, Result};

pub struct SubprocessObjective {
    child: Child,
    stdin: ChildStdin,
    lines: mpsc::Receiver<std::io::Result<String>>,
    timeout: Duration,
    command: String,
}

impl SubprocessObjective {
    /// Spawn `command` (split on whitespace: program followed by arguments).
    pub fn spawn(command: &str, timeout: Duration) -> Result<Self> {
        let mut parts = command.split_whitespace();
        let Some(program) = parts.next() else {
            return Err(Error::Objective { detail: "empty objective command".into() });
        };
        let mut child = Command::new(program)
            .args(parts)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Objective { detail: format!("cannot start `{command}`: {e}") })?;
        let stdin = child.stdin.take().expect("stdin was piped");
        let stdout = child.stdout.take().expect("stdout was piped");
        // A reader thread lets eviction by timeout work: blocking reads stay
        // on this thread while eval() waits with a deadline.
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            let reader = BufReader::new(stdout);
            for line in reader.lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self {
            child,
            stdin,
            lines: rx,
            timeout,
            command: command.to_string(),
        })
    }
}

impl Objective for SubprocessObjective {
    fn eval(&mut self, x: &[f64]) -> Result<f64> {
        let line = x
            .iter()
            .map(|v| format!("{v}"))
            .collect::<Vec<_>>()
            .join(" ");
        writeln!(self.stdin, "{line}")
            .and_then(|_| self.stdin.flush())
            .map_err(|e| Error::Objective { detail: format!("`{}`: write failed: {e}", self.command) })?;
        let reply = match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(text)) => text,
            Ok(Err(e)) => {
                return Err(Error::Objective { detail: format!(
                    "`{}`: read failed: {e}",
                    self.command
                ) });
            }
            Err(mpsc::RecvTimeoutError::Timeout) => {
                return Err(Error::Objective { detail: format!(
                    "`{}`: no reply within {:?}",
                    self.command, self.timeout
                ) });
            }
            Err(mpsc::RecvTimeoutError::Disconnected) => {
                return Err(Error::Objective { detail: format!(
                    "`{}`: objective process closed its output",
                    self.command
                ) });
            }
        };
        let value: f64 = reply.trim().parse().map_err(|_| {
            Error::Objective { detail: format!(
                "`{}`: expected a number, got `{}`",
                self.command,
                reply.trim()
            ) }
        })?;
        if !value.is_finite() {
            return Err(Error::Objective { detail: format!(
                "`{}`: returned non-finite value {value}",
                self.command
            ) });
        }
        Ok(value)
    }
}

impl Drop for SubprocessObjective {
    fn drop(&mut self) {
        // Closing stdin usually ends the child; kill covers the rest.
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
