pub mod annotate;
pub mod enroll;
pub mod evaluate;
pub mod fuse_scores;
pub mod gen_synth;
pub mod segment;
pub mod train;
