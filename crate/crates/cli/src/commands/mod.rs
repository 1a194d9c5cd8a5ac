pub mod analyze;
pub mod capacity;
pub mod compare;
pub mod gen_schedule;
pub mod min_period;
pub mod simulate;
