//! Black–Scholes implied volatility and implied Delta.

use super::black_scholes::{bs_delta, bs_price, bs_vega, BsParams};
use crate::error::{Error, Result};

const VOL_LO: f64 = 1e-6;
const VOL_HI: f64 = 10.0;

/// Volatility at which the Black–Scholes call price with time to maturity
/// `tau` equals `price`. Safeguarded Newton: steps that leave the current
/// bracket fall back to bisection.
pub fn implied_vol(price: f64, tau: f64, s: f64, strike: f64, r: f64) -> Result<f64> {
    let lower = (s - strike * (-r * tau).exp()).max(0.0);
    if !(tau > 0.0) || !(price > lower) || !(price < s) {
        return Err(Error::NoSolution(format!(
            "price {price} outside no-arbitrage bounds ({lower}, {s}) at tau = {tau}"
        )));
    }
    let params = |sigma: f64| BsParams {
        r,
        sigma,
        strike,
        maturity: tau,
        mu: r,
    };
    let f = |sigma: f64| bs_price(&params(sigma), tau, s) - price;
    let (mut lo, mut hi) = (VOL_LO, VOL_HI);
    if f(lo) > 0.0 || f(hi) < 0.0 {
        return Err(Error::NoSolution(format!("no volatility in [{lo}, {hi}] reproduces {price}")));
    }
    let mut x = 0.3;
    for _ in 0..200 {
        let fx = f(x);
        if fx.abs() < 1e-12 {
            return Ok(x);
        }
        if fx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let vega = bs_vega(&params(x), tau, s).unwrap_or(0.0);
        let newton = x - fx / vega;
        x = if vega > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 1e-15 * hi {
            break;
        }
    }
    if f(x).abs() < 1e-10 {
        Ok(x)
    } else {
        Err(Error::NoSolution(format!("implied volatility did not converge for price {price}")))
    }
}

/// Black–Scholes Delta evaluated at the implied volatility of `price`.
pub fn implied_delta(price: f64, tau: f64, s: f64, strike: f64, r: f64) -> Result<f64> {
    let sigma = implied_vol(price, tau, s, strike, r)?;
    let p = BsParams {
        r,
        sigma,
        strike,
        maturity: tau,
        mu: r,
    };
    Ok(bs_delta(&p, tau, s))
}
