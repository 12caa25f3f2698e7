//! Motion data: file formats, windowing, synthetic skeletons and exporters.

mod export;
mod motion;
mod synth;
mod windows;

pub use export::{export, render_svg, ExportFormat, SvgLayout, MARGIN, PANEL};
pub use motion::{Format, MotionSequence, DEFAULT_FPS, MOTB_MAGIC, MOTB_VERSION};
pub use synth::{chain_edges, synthesize, SynthSpec};
pub use windows::{window_count, windows, WindowPair};
