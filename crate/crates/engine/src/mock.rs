//! Deterministic in-process agents.
//!
//! Mocks speak the same wire types as a real server: they decode the PNG
//! payloads they are sent and answer with encoded PNGs or reply text. Every
//! reply is a pure function of the role, the request bytes and, for the
//! stateful variants, a call counter held behind a mutex.
//!
//! Mocks are addressed with `mock://<behaviour>[?param=value...]` URLs:
//!
//! | behaviour     | roles        | effect                                                    |
//! |---------------|--------------|-----------------------------------------------------------|
//! | `fixture`     | all          | plausible scripted output (see below)                     |
//! | `always-pass` | analyzer     | every question answered yes                               |
//! | `always-fail` | analyzer     | every question answered no                                |
//! | `pass-after`  | analyzer     | `failures=k` failing verdicts, then passing ones          |
//! | `identity`    | refiner      | returns its input image unchanged (same as `fixture`)     |
//! | `garbage`     | chat roles   | never returns JSON                                        |
//! | `down`        | all          | every call is a retryable transport error                 |
//! | `flaky`       | all          | `failures=k` transport errors, then `fixture` behaviour   |
//!
//! Fixture behaviour per role: the narrator describes the mean colour of the
//! opaque pixels; thinker and ranker derive scenes and permutations from a
//! hash of the prompt and seed; the segmenter thresholds alpha on RGBA input
//! and selects exactly-gray pixels on RGB input (optionally dilated by
//! `grow=px`); the template generator paints the region enclosed by the edge
//! map gray (eroded by `inset=px`, default 2) over a non-gray gradient keyed
//! by `hash(prompt, seed)`; the inpainter fills the mask with the mean colour
//! of the unmasked pixels; the refiner is the identity.

use std::collections::VecDeque;
use std::sync::Mutex;

use anywhere_core::mask::{binarize_alpha, dilate, DEFAULT_ALPHA_THRESHOLD};
use anywhere_core::schema::yes_no;
use anywhere_core::{BinaryMask, Channels, RasterImage};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use url::Url;

use crate::agent::wire::decode_b64;
use crate::agent::{
    Agent, AgentError, AgentRole, ChatReply, ChatRequest, HealthReply, ImageReply, ImageTask, ImageTaskRequest,
};
use crate::codec::{decode_edge_png, decode_mask_png, decode_png, encode_mask_png, encode_png};

pub const DEFAULT_MOCK_URL: &str = "mock://fixture";

const SCENE_BANK: &[&str] = &[
    "a sunlit cafe terrace with potted olive trees",
    "a quiet reading corner beside a tall bookshelf",
    "a minimalist loft with polished concrete floors",
    "a rustic farmhouse kitchen with morning light",
    "a seaside deck overlooking calm turquoise water",
    "a cozy cabin interior with a stone fireplace",
    "a modern showroom with soft diffuse lighting",
    "a botanical greenhouse filled with ferns",
    "a city rooftop garden at golden hour",
    "a Scandinavian living room with pale oak floors",
    "a vintage workshop with wooden workbenches",
    "a hotel lobby with marble floors and brass lamps",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Behaviour {
    Fixture,
    AlwaysPass,
    AlwaysFail,
    PassAfter(u64),
    Garbage,
    Down,
    Flaky(u64),
}

/// A built-in agent for one role.
#[derive(Debug)]
pub struct MockAgent {
    role: AgentRole,
    behaviour: Behaviour,
    grow: u32,
    inset: u32,
    calls: Mutex<u64>,
}

impl MockAgent {
    pub fn fixture(role: AgentRole) -> Self {
        Self::with_behaviour(role, Behaviour::Fixture)
    }

    fn with_behaviour(role: AgentRole, behaviour: Behaviour) -> Self {
        Self {
            role,
            behaviour,
            grow: 0,
            inset: 2,
            calls: Mutex::new(0),
        }
    }

    /// Parses a `mock://` URL for `role`.
    pub fn from_url(role: AgentRole, url: &str) -> Result<Self, String> {
        let parsed = Url::parse(url).map_err(|e| format!("invalid mock url {url:?}: {e}"))?;
        if parsed.scheme() != "mock" {
            return Err(format!("not a mock url: {url:?}"));
        }
        let name = parsed.host_str().unwrap_or("fixture");
        let mut params = std::collections::BTreeMap::new();
        for (k, v) in parsed.query_pairs() {
            let n: u64 = v
                .parse()
                .map_err(|_| format!("mock parameter {k}={v} is not a non-negative integer"))?;
            params.insert(k.into_owned(), n);
        }
        let param = |k: &str| params.get(k).copied();
        let behaviour = match name {
            "fixture" | "identity" => Behaviour::Fixture,
            "always-pass" => Behaviour::AlwaysPass,
            "always-fail" => Behaviour::AlwaysFail,
            "pass-after" => Behaviour::PassAfter(param("failures").unwrap_or(1)),
            "garbage" => Behaviour::Garbage,
            "down" => Behaviour::Down,
            "flaky" => Behaviour::Flaky(param("failures").unwrap_or(1)),
            other => return Err(format!("unknown mock behaviour \"{other}\"")),
        };
        let analyzer_only = matches!(
            behaviour,
            Behaviour::AlwaysPass | Behaviour::AlwaysFail | Behaviour::PassAfter(_)
        );
        if analyzer_only && role != AgentRole::Analyzer {
            return Err(format!("mock behaviour \"{name}\" only applies to the analyzer"));
        }
        if behaviour == Behaviour::Garbage && !role.is_chat() {
            return Err("mock behaviour \"garbage\" only applies to chat roles".into());
        }
        let mut agent = Self::with_behaviour(role, behaviour);
        if let Some(g) = param("grow") {
            agent.grow = g as u32;
        }
        if let Some(i) = param("inset") {
            agent.inset = i as u32;
        }
        Ok(agent)
    }

    fn next_call(&self) -> u64 {
        let mut calls = self.calls.lock().expect("mock counter poisoned");
        let n = *calls;
        *calls += 1;
        n
    }

    fn transport_gate(&self) -> Result<u64, AgentError> {
        let n = self.next_call();
        match self.behaviour {
            Behaviour::Down => Err(AgentError::transport(format!("mock {} is down", self.role))),
            Behaviour::Flaky(k) if n < k => Err(AgentError::transport(format!(
                "mock {} transient failure {}",
                self.role,
                n + 1
            ))),
            _ => Ok(n),
        }
    }

    fn wrong_role(&self, what: &str) -> AgentError {
        AgentError::Payload(format!("mock {} cannot serve {what}", self.role))
    }
}

/// Stable 64-bit key for mock randomness.
pub fn content_key(parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest is 32 bytes"))
}

fn bracketed_after<'a>(text: &'a str, marker: &str) -> Option<&'a str> {
    let start = text.find(marker)? + marker.len();
    let rest = &text[start..];
    let end = rest.find(']')?;
    Some(&rest[..end])
}

fn number_after(text: &str, marker: &str) -> Option<usize> {
    let start = text.find(marker)? + marker.len();
    let digits: String = text[start..].chars().take_while(char::is_ascii_digit).collect();
    digits.parse().ok()
}

fn colour_name(r: f64, g: f64, b: f64) -> &'static str {
    const PALETTE: &[(&str, [f64; 3])] = &[
        ("red", [200.0, 40.0, 40.0]),
        ("green", [40.0, 160.0, 60.0]),
        ("blue", [40.0, 70.0, 200.0]),
        ("brown", [130.0, 80.0, 40.0]),
        ("yellow", [220.0, 200.0, 50.0]),
        ("white", [235.0, 235.0, 235.0]),
        ("gray", [128.0, 128.0, 128.0]),
        ("black", [20.0, 20.0, 20.0]),
    ];
    PALETTE
        .iter()
        .min_by(|p, q| {
            let d = |c: &[f64; 3]| (c[0] - r).powi(2) + (c[1] - g).powi(2) + (c[2] - b).powi(2);
            d(&p.1).total_cmp(&d(&q.1))
        })
        .map(|(n, _)| *n)
        .expect("palette is non-empty")
}

fn narrate(image: &RasterImage) -> Value {
    let (mut sum, mut count) = ([0.0f64; 3], 0u64);
    let (mut min_x, mut min_y, mut max_x, mut max_y) = (u32::MAX, u32::MAX, 0, 0);
    for y in 0..image.height() {
        for x in 0..image.width() {
            let p = image.pixel(x, y);
            if p.len() == 4 && p[3] < DEFAULT_ALPHA_THRESHOLD {
                continue;
            }
            for c in 0..3 {
                sum[c] += p[c] as f64;
            }
            count += 1;
            min_x = min_x.min(x);
            min_y = min_y.min(y);
            max_x = max_x.max(x);
            max_y = max_y.max(y);
        }
    }
    if count == 0 {
        return json!({
            "description": "an empty transparent frame",
            "name": "object",
            "viewpoint": "front view",
        });
    }
    let mean = sum.map(|s| s / count as f64);
    let colour = colour_name(mean[0], mean[1], mean[2]);
    let (bw, bh) = (max_x - min_x + 1, max_y - min_y + 1);
    let shape = if bh > bw * 5 / 4 {
        "tall"
    } else if bw > bh * 5 / 4 {
        "wide"
    } else {
        "compact"
    };
    let coverage = count * 100 / (image.width() as u64 * image.height() as u64);
    json!({
        "description": format!(
            "a {colour} object with a {shape} silhouette and smooth matte surfaces, filling about {coverage}% of the frame"
        ),
        "name": format!("{colour} object"),
        "viewpoint": "horizontal view",
    })
}

fn brainstorm(prompt: &str, seed: u64) -> Value {
    let n = number_after(prompt, "Please give ").unwrap_or(5);
    let viewpoint = bracketed_after(prompt, "the viewpoint: [").unwrap_or("front view");
    let mut rng = ChaCha8Rng::seed_from_u64(content_key(&[prompt.as_bytes(), &seed.to_le_bytes()]));
    let mut bank: Vec<&str> = SCENE_BANK.to_vec();
    bank.shuffle(&mut rng);
    let scenes: Vec<String> = (0..n)
        .map(|i| {
            let base = bank[i % bank.len()];
            if i < bank.len() {
                format!("{base}, {viewpoint}")
            } else {
                format!("{base} (variation {}), {viewpoint}", i / bank.len() + 1)
            }
        })
        .collect();
    json!({ "scenes": scenes })
}

fn rank(prompt: &str, seed: u64) -> Value {
    let n = number_after(prompt, "(from 1 to ").unwrap_or(5);
    let mut ranks: Vec<u32> = (1..=n as u32).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(content_key(&[prompt.as_bytes(), &seed.to_le_bytes()]));
    ranks.shuffle(&mut rng);
    json!({ "ranks": ranks })
}

/// The question ids and whether a score is wanted, read back from the JSON
/// shape embedded in the analyzer prompt.
fn requested_answers(prompt: &str) -> (Vec<String>, bool) {
    let Some(start) = prompt.rfind("{\"answers\"") else {
        return (Vec::new(), false);
    };
    let mut stream = serde_json::Deserializer::from_str(&prompt[start..]).into_iter::<Value>();
    match stream.next() {
        Some(Ok(v)) => {
            let ids = v["answers"]
                .as_object()
                .map(|o| o.keys().cloned().collect())
                .unwrap_or_default();
            (ids, v.get("aesthetic_score").is_some())
        }
        _ => (Vec::new(), false),
    }
}

fn analyze(prompt: &str, pass: bool) -> Value {
    let (ids, wants_score) = requested_answers(prompt);
    let answer = if pass { "yes" } else { "no" };
    let answers: serde_json::Map<String, Value> = ids.into_iter().map(|id| (id, json!(answer))).collect();
    let mut out = json!({ "answers": answers });
    if wants_score {
        out["aesthetic_score"] = json!(if pass { 4 } else { 2 });
    }
    out
}

fn segment(image: &RasterImage, grow: u32) -> BinaryMask {
    match image.channels() {
        Channels::Rgba => binarize_alpha(image, DEFAULT_ALPHA_THRESHOLD).expect("rgba input"),
        Channels::Rgb => {
            let bits = image.pixels().map(|p| p[0] == p[1] && p[1] == p[2]).collect();
            let mask = BinaryMask::new(image.width(), image.height(), bits).expect("same dims");
            dilate(&mask, grow)
        }
    }
}

fn erode(mask: &BinaryMask, radius: u32) -> BinaryMask {
    let inverted = BinaryMask::from_fn(mask.width(), mask.height(), |x, y| !mask.get(x, y)).expect("same dims");
    let grown = dilate(&inverted, radius);
    BinaryMask::from_fn(mask.width(), mask.height(), |x, y| !grown.get(x, y)).expect("same dims")
}

/// Pixels enclosed by the edge map: everything not reachable from the image
/// border without crossing a (slightly thickened) edge.
fn enclosed_region(edges: &BinaryMask) -> BinaryMask {
    let barrier = dilate(edges, 1);
    let (w, h) = (edges.width() as usize, edges.height() as usize);
    let mut outside = vec![false; w * h];
    let mut queue = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            let on_border = x == 0 || y == 0 || x == w - 1 || y == h - 1;
            if on_border && !barrier.bits()[y * w + x] {
                outside[y * w + x] = true;
                queue.push_back((x, y));
            }
        }
    }
    while let Some((x, y)) = queue.pop_front() {
        let neighbours = [
            (x.wrapping_sub(1), y),
            (x + 1, y),
            (x, y.wrapping_sub(1)),
            (x, y + 1),
        ];
        for (nx, ny) in neighbours {
            if nx < w && ny < h {
                let i = ny * w + nx;
                if !outside[i] && !barrier.bits()[i] {
                    outside[i] = true;
                    queue.push_back((nx, ny));
                }
            }
        }
    }
    BinaryMask::new(edges.width(), edges.height(), outside.into_iter().map(|o| !o).collect()).expect("same dims")
}

fn paint_template(edges: &BinaryMask, prompt: &str, seed: u64, inset: u32) -> RasterImage {
    let key = content_key(&[prompt.as_bytes(), &seed.to_le_bytes()]);
    let byte = |i: u32| (key >> (8 * i)) as u8;
    // Background keeps green well above red so no background pixel is gray.
    let top = [byte(0) % 90, 150 + byte(1) % 100, byte(2)];
    let bottom = [byte(3) % 90, 150 + byte(4) % 100, byte(5)];
    let subject_level = 96 + byte(6) % 64;
    let subject = erode(&enclosed_region(edges), inset);
    let h = edges.height().max(2) - 1;
    RasterImage::from_fn(edges.width(), edges.height(), Channels::Rgb, |x, y| {
        if subject.get(x, y) {
            return [subject_level, subject_level, subject_level, 255];
        }
        let t = y as f64 / h as f64;
        let lerp = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * t).round() as u8;
        [lerp(top[0], bottom[0]), lerp(top[1], bottom[1]), lerp(top[2], bottom[2]), 255]
    })
    .expect("positive dims")
}

fn inpaint(image: &RasterImage, mask: &BinaryMask) -> Result<RasterImage, AgentError> {
    if image.dimensions() != mask.dimensions() {
        return Err(AgentError::Payload("inpaint image and mask differ in size".into()));
    }
    let rgb = image.to_rgb();
    let (mut sum, mut n) = ([0u64; 3], 0u64);
    for (p, &masked) in rgb.pixels().zip(mask.bits()) {
        if !masked {
            for c in 0..3 {
                sum[c] += p[c] as u64;
            }
            n += 1;
        }
    }
    let fill = if n == 0 {
        [90, 160, 90]
    } else {
        sum.map(|s| ((s + n / 2) / n) as u8)
    };
    let mut out = rgb;
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(x, y) {
                out.pixel_mut(x, y).copy_from_slice(&fill);
            }
        }
    }
    Ok(out)
}

fn payload(e: impl std::fmt::Display) -> AgentError {
    AgentError::Payload(e.to_string())
}

impl Agent for MockAgent {
    fn chat(&self, request: &ChatRequest) -> Result<ChatReply, AgentError> {
        if !self.role.is_chat() || request.role != self.role {
            return Err(self.wrong_role("chat"));
        }
        let call = self.transport_gate()?;
        let seed = request.seed.unwrap_or(0);
        let prompt = request.user_prompt.as_str();
        let value = match (self.behaviour, self.role) {
            (Behaviour::Garbage, _) => {
                return Ok(ChatReply {
                    text: "I'm sorry, I can only answer in prose today.".into(),
                })
            }
            (Behaviour::AlwaysPass, _) => analyze(prompt, true),
            (Behaviour::AlwaysFail, _) => analyze(prompt, false),
            (Behaviour::PassAfter(k), _) => analyze(prompt, call >= k),
            (_, AgentRole::Narrator) => {
                let png = request
                    .image_png()?
                    .ok_or_else(|| AgentError::Payload("narrator needs an image".into()))?;
                narrate(&decode_png(&png).map_err(payload)?)
            }
            (_, AgentRole::Thinker) => brainstorm(prompt, seed),
            (_, AgentRole::Ranker) => rank(prompt, seed),
            (_, AgentRole::Analyzer) => analyze(prompt, true),
            _ => return Err(self.wrong_role("chat")),
        };
        Ok(ChatReply {
            text: format!("```json\n{value}\n```"),
        })
    }

    fn image_task(&self, request: &ImageTaskRequest) -> Result<ImageReply, AgentError> {
        if request.task.role() != self.role {
            return Err(self.wrong_role(&format!("{:?}", request.task)));
        }
        request.validate()?;
        self.transport_gate()?;
        let prompt = request.prompt.as_deref().unwrap_or("");
        match request.task {
            ImageTask::Segment => {
                let image = decode_png(&request.image_png("image")?).map_err(payload)?;
                let mask = segment(&image, self.grow);
                Ok(ImageReply::mask(&encode_mask_png(&mask).map_err(payload)?))
            }
            ImageTask::Canny2img => {
                let edges = decode_edge_png(&request.image_png("edge")?).map_err(payload)?;
                let template = paint_template(edges.as_mask(), prompt, request.seed, self.inset);
                Ok(ImageReply::image(&encode_png(&template).map_err(payload)?))
            }
            ImageTask::Inpaint => {
                let image = decode_png(&request.image_png("image")?).map_err(payload)?;
                let mask = decode_mask_png(&request.image_png("mask")?).map_err(payload)?;
                Ok(ImageReply::image(&encode_png(&inpaint(&image, &mask)?).map_err(payload)?))
            }
            ImageTask::Img2img => Ok(ImageReply {
                image_b64: request.images.get("image").cloned(),
                mask_b64: None,
            }),
        }
    }

    fn health(&self) -> Result<HealthReply, AgentError> {
        if self.behaviour == Behaviour::Down {
            return Err(AgentError::transport(format!("mock {} is down", self.role)));
        }
        Ok(HealthReply {
            status: "ok".into(),
            roles: vec![self.role],
        })
    }

    fn measures_latency(&self) -> bool {
        false
    }
}

/// Replays canned chat replies in order; after the script runs out the last
/// reply repeats. Image tasks are delegated to a fixture mock.
#[derive(Debug)]
pub struct ScriptedAgent {
    role: AgentRole,
    replies: Vec<String>,
    position: Mutex<usize>,
    fallback: MockAgent,
}

impl ScriptedAgent {
    pub fn new(role: AgentRole, replies: Vec<String>) -> Self {
        assert!(!replies.is_empty(), "a script needs at least one reply");
        Self {
            role,
            replies,
            position: Mutex::new(0),
            fallback: MockAgent::fixture(role),
        }
    }

    /// Number of chat replies served so far.
    pub fn served(&self) -> usize {
        *self.position.lock().expect("script position poisoned")
    }
}

impl Agent for ScriptedAgent {
    fn chat(&self, request: &ChatRequest) -> Result<ChatReply, AgentError> {
        if request.role != self.role {
            return Err(AgentError::Payload(format!("script for {} got {}", self.role, request.role)));
        }
        let mut pos = self.position.lock().expect("script position poisoned");
        let text = self.replies[(*pos).min(self.replies.len() - 1)].clone();
        *pos += 1;
        Ok(ChatReply { text })
    }

    fn image_task(&self, request: &ImageTaskRequest) -> Result<ImageReply, AgentError> {
        self.fallback.image_task(request)
    }

    fn health(&self) -> Result<HealthReply, AgentError> {
        self.fallback.health()
    }

    fn measures_latency(&self) -> bool {
        false
    }
}

/// Reads a yes/no answer the way the analyzer parser does; handy in tests.
pub fn answer_is_yes(v: &Value) -> bool {
    yes_no(v).unwrap_or(false)
}

/// Decodes a base64 PNG field from a wire body.
pub fn decode_png_field(b64: &str) -> Result<RasterImage, AgentError> {
    decode_png(&decode_b64(b64)?).map_err(payload)
}
