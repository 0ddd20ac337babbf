pub mod frame;
pub mod io;
pub mod screen;
pub mod synth;
pub mod preprocess;
pub mod detect;
pub mod calibrate;
pub mod events;
