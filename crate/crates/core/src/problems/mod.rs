//! Problem instances with their surrogates, closed forms and generators.

pub mod group_lasso;
pub mod huber;
pub mod lasso;
pub mod localization;
pub mod logistic;
pub mod quadratic;

pub use group_lasso::GroupLasso;
pub use huber::{generate_huber, huber, huber_prime, HuberAgent, HuberInstance, HuberSurrogate};
pub use lasso::{generate_lasso, Lasso, LassoExact};
pub use localization::{generate_localization, LocalizationInstance, LocalizationSurrogate};
pub use logistic::{generate_logistic, Logistic, LogisticNewton};
pub use quadratic::{random_spd_quadratic, Quadratic};
