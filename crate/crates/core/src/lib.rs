pub mod lpv;
pub mod poly;
pub mod sdp;
pub mod sim;
pub mod sos;
