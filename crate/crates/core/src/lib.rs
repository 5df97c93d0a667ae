pub mod characterization;
pub mod closed_form;
pub mod error;
pub mod export;
pub mod frames;
pub mod model;
pub mod oracle;
pub mod pattern;
