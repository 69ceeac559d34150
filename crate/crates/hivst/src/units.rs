//! Calendar conventions. One year is twelve months and one month is
//! 30.4375 days (a 365.25-day year).

pub const MONTHS_PER_YEAR: f64 = 12.0;
pub const DAYS_PER_MONTH: f64 = 30.4375;

pub fn days_to_months(days: f64) -> f64 {
    days / DAYS_PER_MONTH
}

pub fn years_to_months(years: f64) -> f64 {
    years * MONTHS_PER_YEAR
}

pub fn per_year_to_per_month(rate: f64) -> f64 {
    rate / MONTHS_PER_YEAR
}

pub fn per_month_to_per_year(rate: f64) -> f64 {
    rate * MONTHS_PER_YEAR
}
