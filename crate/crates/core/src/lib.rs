pub mod branches;
pub mod closure;
pub mod oracle;
pub mod rootfind;
pub mod specfun;
pub mod spectral;
