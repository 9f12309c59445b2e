"""Guardrailed natural-language data retrieval for a plant-maintenance database.

Two retrieval paths over the same embedded database:

* a function-calling path where a router agent dispatches to domain
  sub-agents that may only invoke pre-approved, parameterized SQL
  functions, and
* a baseline pipeline that drafts free-form SQL from intent extraction
  and retrieved example queries.

Both paths share schema-validated structured outputs, bounded retries,
append-only audit logging, and an evaluation harness that compares them.
"""

__version__ = "0.1.0"
