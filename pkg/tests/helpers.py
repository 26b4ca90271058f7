import numpy as np

from cstarindex.action_model import GradedElement, box_labels


def random_element(model, R, rng, amp=1) -> GradedElement:
    """Band-limited element with Gaussian coefficients on labels ``|λ| ≤ R``."""
    x = GradedElement.zeros(model, amp)
    for lam in box_labels(R, model.r):
        if amp == 1:
            c = rng.standard_normal(model.nB) + 1j * rng.standard_normal(model.nB)
            b = model.from_coefficient_coords(c)
        else:
            b = np.zeros((amp * model.d, amp * model.d), dtype=complex)
            for i in range(amp):
                for j in range(amp):
                    c = rng.standard_normal(model.nB) + 1j * rng.standard_normal(model.nB)
                    b[i * model.d:(i + 1) * model.d, j * model.d:(j + 1) * model.d] = model.from_coefficient_coords(c)
        x = x + GradedElement.monomial(model, tuple(lam), b, amp=amp)
    return x
