"""
Writing and lowering review models
==================================

A model is a few lines of text.  ``~`` is a regression, ``~~`` a
(co)variance, ``=~`` a latent measurement and ``:=`` a derived quantity.
Lowering turns the text into a parameter table, which fixes how many
parameters are estimated and the degrees of freedom left for testing fit.
"""

from toxsem import models
from toxsem.dsl import lower, parse_model, print_model
from toxsem.ram import count_df

# %%
# The path model names every variance and covariance itself, so it is
# lowered in explicit mode: nothing is added behind your back.
text = models.model_text("path")
print(text)

ast = parse_model(text)
table = lower(ast, "explicit", models.OBSERVED)
print(f"free parameters: {table.n_free}, df: {count_df(table)}")

# %%
# The measurement model leaves residual variances implicit.  Auto mode
# adds them and fixes the first loading of each factor to 1 so the
# latent scale is identified.
meas = lower(parse_model(models.model_text("measurement")), "auto", models.OBSERVED)
for row in meas.rows:
    state = "free" if row.free else f"fixed={row.fixed_value}"
    print(f"  {row.lhs:>22} {row.op:<2} {row.rhs:<22} {state}")
print(f"free parameters: {meas.n_free}, df: {count_df(meas)}")

# %%
# Labels name parameters so that defined quantities can combine them.
# Adding labels or definitions never changes what gets estimated.
te = lower(parse_model(models.model_text("total_effect")), "explicit", models.OBSERVED)
print([d.name for d in te.defined], te.n_free)

# %%
# Printing is the inverse of parsing, which makes models easy to generate
# programmatically and write back out.
assert parse_model(print_model(ast)) == ast
print(print_model(parse_model("f ≈ x1 + x2 + x3\nab := a*b")))
