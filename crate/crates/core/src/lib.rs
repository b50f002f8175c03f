//! Solver and simulator for the Dirichlet problem `x'' = f(t, x)`,
//! `x(0) = x(T) = 0`, in a billiard table `K` whose boundary reflects
//! trajectories elastically.
//!
//! * [`geometry`]: tables (interval, ball, star-shaped planar regions).
//! * [`dynamics`]: force fields and the impact law.
//! * [`integrator`]: event-detecting integration of the impulsive Cauchy problem.
//! * [`shooting`]: endpoint map, bracketing, bisection and solution enumeration in 1-D.
//! * [`degree`]: attainable sets, winding numbers and uniform-motion solutions in 2-D.
//! * [`config`], [`export`], [`cli`]: problem files, CSV output and the command line.

pub mod cli;
pub mod config;
pub mod degree;
pub mod dynamics;
pub mod export;
pub mod geometry;
pub mod integrator;
pub mod shooting;
