pub mod fields;
pub mod windows;
pub mod shglue;
pub mod eglue;
pub mod tower;
pub mod construct;
