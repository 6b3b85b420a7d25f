//! Subprocess protocol for external denoisers and regressors.
//!
//! The host spawns the plugin and talks to it over stdin/stdout with
//! length-prefixed little-endian frames. Every frame starts with a `u32`
//! giving the number of bytes that follow it.
//!
//! | frame              | body after the length                                   |
//! |--------------------|---------------------------------------------------------|
//! | handshake (both)   | `u16` protocol version (= 1)                            |
//! | request            | `u8` kind (1 = eps, 2 = regress), `u32` l, `u32` width, `u32` height, `f32` × w·h |
//! | eps response       | `u32` width, `u32` height, `f32` × w·h                  |
//! | regress response   | `f64` value, `u32` width, `u32` height, `f32` × w·h (gradient) |
//!
//! The host sends its handshake first and the plugin echoes its own version.
//! Closing stdin ends the session.

use std::io::{BufReader, BufWriter, Read, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use super::denoiser::Denoiser;
use super::regressor::Regressor;
use super::schedule::NoiseSchedule;
use crate::error::{Error, Result};
use crate::image::Image2D;

pub const PROTOCOL_VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RequestKind {
    Eps = 1,
    Regress = 2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub kind: RequestKind,
    pub step: u32,
    pub image: Image2D,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Response {
    Eps(Image2D),
    Regress { value: f64, grad: Image2D },
}

fn io_err(e: std::io::Error) -> Error {
    Error::Io(e)
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn put_image(buf: &mut Vec<u8>, img: &Image2D) {
    buf.extend_from_slice(&(img.width() as u32).to_le_bytes());
    buf.extend_from_slice(&(img.height() as u32).to_le_bytes());
    for &p in img.pixels() {
        buf.extend_from_slice(&(p as f32).to_le_bytes());
    }
}

fn take_image(body: &[u8], spacing: f64) -> Result<Image2D> {
    if body.len() < 8 {
        return Err(Error::invalid("image frame too short"));
    }
    let w = u32::from_le_bytes(body[0..4].try_into().unwrap()) as usize;
    let h = u32::from_le_bytes(body[4..8].try_into().unwrap()) as usize;
    let payload = &body[8..];
    if payload.len() != 4 * w * h {
        return Err(Error::invalid(format!(
            "image frame carries {} bytes for {w}x{h}",
            payload.len()
        )));
    }
    let pixels = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Image2D::new(w, h, spacing, pixels)
}

fn write_frame(w: &mut impl Write, body: &[u8]) -> Result<()> {
    w.write_all(&(body.len() as u32).to_le_bytes()).map_err(io_err)?;
    w.write_all(body).map_err(io_err)?;
    w.flush().map_err(io_err)
}

/// Reads one frame body; `None` on clean end of stream before a frame starts.
fn read_frame(r: &mut impl Read) -> Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(io_err(e)),
    }
    let mut body = vec![0u8; u32::from_le_bytes(len) as usize];
    r.read_exact(&mut body).map_err(io_err)?;
    Ok(Some(body))
}

pub fn write_handshake(w: &mut impl Write, version: u16) -> Result<()> {
    write_frame(w, &version.to_le_bytes())
}

pub fn read_handshake(r: &mut impl Read) -> Result<u16> {
    let len = read_u32(r).map_err(io_err)?;
    if len != 2 {
        return Err(Error::invalid(format!("handshake frame of length {len}")));
    }
    let mut b = [0u8; 2];
    r.read_exact(&mut b).map_err(io_err)?;
    Ok(u16::from_le_bytes(b))
}

pub fn write_request(w: &mut impl Write, req: &Request) -> Result<()> {
    let mut body = Vec::with_capacity(13 + 4 * req.image.len());
    body.push(req.kind as u8);
    body.extend_from_slice(&req.step.to_le_bytes());
    put_image(&mut body, &req.image);
    write_frame(w, &body)
}

/// Next request, or `None` once the host has closed the stream.
pub fn read_request(r: &mut impl Read) -> Result<Option<Request>> {
    let Some(body) = read_frame(r)? else {
        return Ok(None);
    };
    if body.len() < 5 {
        return Err(Error::invalid("request frame too short"));
    }
    let kind = match body[0] {
        1 => RequestKind::Eps,
        2 => RequestKind::Regress,
        k => return Err(Error::invalid(format!("unknown request kind {k}"))),
    };
    let step = u32::from_le_bytes(body[1..5].try_into().unwrap());
    let image = take_image(&body[5..], 1.0)?;
    Ok(Some(Request { kind, step, image }))
}

pub fn write_response(w: &mut impl Write, resp: &Response) -> Result<()> {
    let mut body = Vec::new();
    match resp {
        Response::Eps(img) => put_image(&mut body, img),
        Response::Regress { value, grad } => {
            body.extend_from_slice(&value.to_le_bytes());
            put_image(&mut body, grad);
        }
    }
    write_frame(w, &body)
}

pub fn read_response(r: &mut impl Read, kind: RequestKind, spacing: f64) -> Result<Response> {
    let body = read_frame(r)?.ok_or_else(|| Error::invalid("plugin closed its output"))?;
    match kind {
        RequestKind::Eps => Ok(Response::Eps(take_image(&body, spacing)?)),
        RequestKind::Regress => {
            if body.len() < 8 {
                return Err(Error::invalid("regress response too short"));
            }
            let value = f64::from_le_bytes(body[0..8].try_into().unwrap());
            Ok(Response::Regress { value, grad: take_image(&body[8..], spacing)? })
        }
    }
}

/// Plugin side: answers the handshake, then serves requests until the host
/// closes stdin.
pub fn serve<R: Read, W: Write>(
    mut input: R,
    mut output: W,
    mut handler: impl FnMut(&Request) -> Result<Response>,
) -> Result<()> {
    let version = read_handshake(&mut input)?;
    if version != PROTOCOL_VERSION {
        return Err(Error::invalid(format!("unsupported protocol version {version}")));
    }
    write_handshake(&mut output, PROTOCOL_VERSION)?;
    while let Some(req) = read_request(&mut input)? {
        let resp = handler(&req)?;
        write_response(&mut output, &resp)?;
    }
    Ok(())
}

/// Host side of one plugin subprocess.
pub struct PluginClient {
    child: Child,
    stdin: BufWriter<ChildStdin>,
    stdout: BufReader<ChildStdout>,
    command: String,
}

impl PluginClient {
    /// Spawns `command` (whitespace-separated program and arguments) and performs the handshake.
    pub fn spawn(command: &str) -> Result<Self> {
        let mut parts = command.split_whitespace();
        let program = parts
            .next()
            .ok_or_else(|| Error::invalid("empty plugin command"))?;
        let mut child = Command::new(program)
            .args(parts)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Plugin { step: 0, message: format!("cannot start {command:?}: {e}") })?;
        let stdin = BufWriter::new(child.stdin.take().expect("piped stdin"));
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        let mut client = Self { child, stdin, stdout, command: command.to_string() };
        let handshake = write_handshake(&mut client.stdin, PROTOCOL_VERSION)
            .and_then(|_| read_handshake(&mut client.stdout));
        match handshake {
            Ok(PROTOCOL_VERSION) => Ok(client),
            Ok(v) => Err(client.fail(0, format!("plugin speaks protocol version {v}"))),
            Err(e) => Err(client.fail(0, format!("handshake failed: {e}"))),
        }
    }

    fn fail(&self, step: usize, message: String) -> Error {
        Error::Plugin { step, message: format!("{} ({})", message, self.command) }
    }

    pub fn request(&mut self, kind: RequestKind, x: &Image2D, l: usize) -> Result<Response> {
        let req = Request { kind, step: l as u32, image: x.clone() };
        let resp = write_request(&mut self.stdin, &req)
            .and_then(|_| read_response(&mut self.stdout, kind, x.pixel_spacing()));
        let resp = resp.map_err(|e| self.fail(l, e.to_string()))?;
        let out_shape_ok = match &resp {
            Response::Eps(img) => img.same_shape(x),
            Response::Regress { grad, .. } => grad.same_shape(x),
        };
        if !out_shape_ok {
            return Err(self.fail(l, "plugin returned an image of the wrong shape".into()));
        }
        Ok(resp)
    }
}

impl Drop for PluginClient {
    fn drop(&mut self) {
        let _ = self.stdin.flush();
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Denoiser for PluginClient {
    fn predict_eps(&mut self, x_l: &Image2D, l: usize, _sched: &NoiseSchedule) -> Result<Image2D> {
        match self.request(RequestKind::Eps, x_l, l)? {
            Response::Eps(img) => Ok(img),
            Response::Regress { .. } => unreachable!("eps request decodes to eps response"),
        }
    }
}

impl Regressor for PluginClient {
    fn evaluate(&mut self, x: &Image2D, l: usize) -> Result<(f64, Image2D)> {
        match self.request(RequestKind::Regress, x, l)? {
            Response::Regress { value, grad } => Ok((value, grad)),
            Response::Eps(_) => unreachable!("regress request decodes to regress response"),
        }
    }
}
