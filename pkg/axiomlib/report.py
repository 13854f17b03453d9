"""
Run reports.

A report is a deterministic function of its inputs: key=value lines followed
by tab-separated table sections in the text form, or one sorted-key JSON
object in the machine-readable form.
"""

import json
from dataclasses import dataclass, field

from .ledger import verify_chain_integrity
from .scenario import scenario_dict

REPORT_VERSION = 1


@dataclass(frozen=True)
class ChainSummary:
    height: int
    tx_count: int
    valid: bool
    head: str
    bad_height: int = None

    @classmethod
    def of(cls, ledger):
        report = verify_chain_integrity(ledger)
        return cls(ledger.height, sum(len(b.txs) for b in ledger.blocks), report.valid,
                   ledger.head_hash.hex(), report.bad_height)


@dataclass
class RunReport:
    command: str
    spec: object = None
    outcome: object = None
    chain: ChainSummary = None
    ablation: object = None
    sweep: object = None
    succession: object = None
    fields: dict = field(default_factory=dict)

    def summary(self):
        """Flat key=value fields in output order."""
        out = {"report": REPORT_VERSION, "command": self.command}
        if self.spec is not None:
            out.update(scenario=self.spec.name, seed=self.spec.seed, pathway=self.spec.pathway,
                       axioms=",".join(str(a) for a in sorted(self.spec.axioms_enabled)) or "none",
                       availability=self.spec.availability, ticks=self.spec.ticks)
        if self.outcome is not None:
            o = self.outcome
            out.update(contained=o.contained, breaches=o.breach_count, detections=o.detections,
                       attempts=o.attempts, misaligned_actions=o.misaligned_actions, growth_flags=o.growth_flags)
        if self.chain is not None:
            out.update({"chain.height": self.chain.height, "chain.txs": self.chain.tx_count,
                        "chain.integrity": "valid" if self.chain.valid else f"invalid@{self.chain.bad_height}",
                        "chain.head": self.chain.head})
        if self.ablation is not None:
            uncovered = self.ablation.uncovered_axioms()
            out["ablation.uncovered"] = ",".join(map(str, uncovered)) or "none"
        if self.sweep is not None:
            out["sweep.monotone"] = self.sweep.monotone()
        if self.succession is not None:
            s = self.succession
            out.update({"succession.generations": s.generations, "succession.n": s.n, "succession.k": s.k,
                        "succession.p": s.p, "succession.trials": s.trials, "succession.handoffs": s.handoffs,
                        "succession.compromised": s.compromised, "succession.observed": s.observed_rate,
                        "succession.se": s.standard_error, "succession.expected": s.expected_rate,
                        "succession.lineage": "intact" if s.lineage_intact else "broken",
                        "succession.halted": s.halted_trials})
        out.update(self.fields)
        return out

    def tables(self):
        """(title, header, rows) triples."""
        tables = []
        if self.outcome is not None:
            tables.append(("breaches", ("tick", "agent", "step"),
                           [(b.tick, b.agent, b.step) for b in self.outcome.breaches]))
            tables.append(("agents", ("agent", "share", "capability"),
                           [(name, share, self.outcome.capabilities.get(name, 0))
                            for name, share in self.outcome.resource_shares.items()]))
        if self.ablation is not None:
            m = self.ablation
            header = ("omitted",) + m.pathways
            rows = [("none",) + tuple(_cell(c) for c in m.baseline)]
            rows += [(str(a),) + tuple(_cell(c) for c in m.rows[a]) for a in sorted(m.rows)]
            tables.append(("ablation", header, rows))
        if self.sweep is not None:
            tables.append(("sweep", ("availability", "frequency", "se", "trials"),
                           [(p.availability, p.frequency, p.standard_error, p.trials) for p in self.sweep.points]))
        if self.succession is not None:
            tables.append(("handoffs", ("generation", "compromised_custodians", "status"),
                           [(h.generation, h.compromised_custodians, h.status)
                            for h in self.succession.first_trial]))
        return tables

    def to_dict(self):
        data = {key: value for key, value in self.summary().items()}
        if self.spec is not None:
            data["spec"] = scenario_dict(self.spec)
        for title, header, rows in self.tables():
            data[title] = [dict(zip(header, row)) for row in rows]
        return data


def _cell(cell):
    return "C" if cell.contained else f"B{cell.breaches}"


def _text(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_text(report):
    lines = [f"{key}={_text(value)}" for key, value in report.summary().items()]
    for title, header, rows in report.tables():
        lines.append("")
        lines.append(f"[{title}]")
        lines.append("\t".join(header))
        lines.extend("\t".join(_text(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def format_json(report):
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


def render(report, fmt="text"):
    return format_json(report) if fmt == "json" else format_text(report)
