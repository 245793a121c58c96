pub mod batch;
pub mod export;
pub mod system_file;
