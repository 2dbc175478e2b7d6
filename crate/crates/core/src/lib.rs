pub mod cve;
pub mod extract;
pub mod sources;
pub mod transport;
pub mod urlnorm;
pub mod dyadic;
pub mod network;
pub mod selection;
pub mod expansion;
pub mod evaluation;
pub mod report;
pub mod testkit;
