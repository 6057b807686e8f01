/**
 * Bindings tests: structured error codes for malformed input, and exact
 * agreement with a direct CLI run on the same spec, data and seed.
 */

import { execFile } from "node:child_process";
import { promisify } from "node:util";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { describe, expect, it } from "vitest";

import {
  buildGraph,
  fit,
  getPosterior,
  observe,
  releaseHandle,
  type FitReport,
  type Result,
} from "../src/index";

const execFileAsync = promisify(execFile);
const PYTHON = process.env.VMPLITE_PYTHON ?? "python3";

function gmmSpec(n = 500, k = 5): string {
  return JSON.stringify({
    nodes: [
      {
        name: "mu",
        family: "gaussian",
        parents: [
          [0.0, 0.0],
          [
            [0.01, 0.0],
            [0.0, 0.01],
          ],
        ],
        plates: [k],
      },
      {
        name: "Lambda",
        family: "wishart",
        parents: [
          2.0,
          [
            [2.0, 0.0],
            [0.0, 2.0],
          ],
        ],
        plates: [k],
      },
      { name: "alpha", family: "dirichlet", parents: [Array(k).fill(0.01)] },
      { name: "z", family: "categorical", parents: ["alpha"], plates: [n] },
      {
        name: "y",
        kind: "mixture",
        family: "gaussian",
        parents: ["z", "mu", "Lambda"],
        plates: [n],
      },
    ],
    observe: [],
    engine: { mode: "vb", max_sweeps: 200, tol: 1e-6, seed: 7, initialize: ["z"] },
  });
}

/** Deterministic standard normals (mulberry32 + Box-Muller). */
function normals(count: number, seed: number): Float64Array {
  let a = seed >>> 0;
  const uniform = () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
  const out = new Float64Array(count);
  for (let i = 0; i < count; i += 2) {
    const u = Math.max(uniform(), 1e-12);
    const v = uniform();
    const r = Math.sqrt(-2 * Math.log(u));
    out[i] = r * Math.cos(2 * Math.PI * v);
    if (i + 1 < count) out[i + 1] = r * Math.sin(2 * Math.PI * v);
  }
  return out;
}

function gmmData(n = 500): Float64Array {
  const data = normals(n * 2, 1234);
  for (let i = 0; i < 200 * 2; i++) data[i] += 2.0;
  return data;
}

function expectError<T>(result: Result<T>, code: string): void {
  expect(result.ok).toBe(false);
  if (!result.ok) expect(result.code).toBe(code);
}

function unwrap<T>(result: Result<T>): T {
  expect(result.ok, JSON.stringify(result)).toBe(true);
  return (result as { ok: true; value: T }).value;
}

describe("buildGraph", () => {
  it("accepts the mixture spec", async () => {
    const handle = unwrap(await buildGraph(gmmSpec()));
    expect(handle).toBeGreaterThan(0);
    unwrap(releaseHandle(handle));
  });

  it("reports PARSE for malformed JSON", async () => {
    expectError(await buildGraph("{nodes: ["), "PARSE");
  });

  it("reports VALIDATION for an unresolved parent", async () => {
    const doc = JSON.parse(gmmSpec());
    doc.nodes[3].parents = ["mu2"];
    const result = await buildGraph(JSON.stringify(doc));
    expectError(result, "VALIDATION");
    if (!result.ok) expect(result.message).toContain("mu2");
  });

  it("reports STALE_HANDLE on double release", async () => {
    const handle = unwrap(await buildGraph(gmmSpec()));
    unwrap(releaseHandle(handle));
    expectError(releaseHandle(handle), "STALE_HANDLE");
  });
});

describe("observe", () => {
  it("accepts a (500,2) buffer for the mixture node", async () => {
    const handle = unwrap(await buildGraph(gmmSpec()));
    unwrap(observe(handle, "y", gmmData(), [500, 2]));
    unwrap(releaseHandle(handle));
  });

  it("rejects a transposed shape", async () => {
    const handle = unwrap(await buildGraph(gmmSpec()));
    expectError(observe(handle, "y", gmmData(), [2, 500]), "SHAPE");
    unwrap(releaseHandle(handle));
  });

  it("rejects a mask of the wrong length", async () => {
    const handle = unwrap(await buildGraph(gmmSpec()));
    expectError(
      observe(handle, "y", gmmData(), [500, 2], new Uint8Array(499)),
      "SHAPE"
    );
    unwrap(releaseHandle(handle));
  });

  it("rejects out-of-support values", async () => {
    const spec = JSON.stringify({
      nodes: [
        { name: "tau", family: "gamma", parents: [1.0, 1.0], plates: [3] },
      ],
      engine: { mode: "vb" },
    });
    const handle = unwrap(await buildGraph(spec));
    expectError(
      observe(handle, "tau", Float64Array.from([1.0, 0.0, 2.0]), [3]),
      "SUPPORT"
    );
    unwrap(releaseHandle(handle));
  });

  it("reports UNKNOWN_NODE for unknown names", async () => {
    const handle = unwrap(await buildGraph(gmmSpec()));
    expectError(observe(handle, "nope", gmmData(), [500, 2]), "UNKNOWN_NODE");
    unwrap(releaseHandle(handle));
  });
});

describe("fit", () => {
  it("reports CONFIG without observations", async () => {
    const handle = unwrap(await buildGraph(gmmSpec()));
    expectError(await fit(handle), "CONFIG");
    unwrap(releaseHandle(handle));
  });

  it("reports CONFIG for svi without a schedule", async () => {
    const handle = unwrap(await buildGraph(gmmSpec()));
    unwrap(observe(handle, "y", gmmData(), [500, 2]));
    expectError(await fit(handle, JSON.stringify({ mode: "svi" })), "CONFIG");
    unwrap(releaseHandle(handle));
  });

  it("reports BUSY on concurrent use of one handle", async () => {
    const handle = unwrap(await buildGraph(gmmSpec()));
    unwrap(observe(handle, "y", gmmData(), [500, 2]));
    const first = fit(handle, JSON.stringify({ max_sweeps: 30 }));
    const second = await fit(handle, JSON.stringify({ max_sweeps: 30 }));
    expectError(second, "BUSY");
    unwrap(await first);
    unwrap(releaseHandle(handle));
  }, 120000);

  it("matches a direct CLI run entry for entry", async () => {
    // Bindings path.
    const handle = unwrap(await buildGraph(gmmSpec()));
    const data = gmmData();
    unwrap(observe(handle, "y", data, [500, 2]));
    const reportJson = unwrap(await fit(handle, JSON.stringify({ seed: 7 })));
    const viaBindings = JSON.parse(reportJson) as FitReport;

    // Direct CLI path on an identically written CSV.
    const workdir = fs.mkdtempSync(path.join(os.tmpdir(), "vmplite-cli-"));
    const lines: string[] = [];
    for (let r = 0; r < 500; r++)
      lines.push(`${String(data[2 * r])},${String(data[2 * r + 1])}`);
    fs.writeFileSync(path.join(workdir, "y.csv"), lines.join("\n") + "\n");
    const doc = JSON.parse(gmmSpec());
    doc.observe = [{ node: "y", data: "y.csv" }];
    doc.engine.seed = 7;
    fs.writeFileSync(path.join(workdir, "spec.json"), JSON.stringify(doc));
    const dumpPath = path.join(workdir, "dump.json");
    await execFileAsync(
      PYTHON,
      ["-m", "vmplite.cli", "fit", "spec.json", "--output", dumpPath],
      { cwd: workdir }
    ).catch((e) => {
      if (typeof (e as { code?: number }).code !== "number") throw e;
    });
    const viaCli = JSON.parse(fs.readFileSync(dumpPath, "utf-8")) as FitReport;

    expect(viaBindings.sweeps).toBe(viaCli.sweeps);
    expect(viaBindings.converged).toBe(viaCli.converged);
    expect(viaBindings.elbo_trace.length).toBe(viaCli.elbo_trace.length);
    for (let i = 0; i < viaCli.elbo_trace.length; i++) {
      expect(
        Math.abs(viaBindings.elbo_trace[i] - viaCli.elbo_trace[i])
      ).toBeLessThanOrEqual(1e-12 * Math.abs(viaCli.elbo_trace[i]));
    }
    fs.rmSync(workdir, { recursive: true, force: true });
    unwrap(releaseHandle(handle));
  }, 120000);
});

describe("getPosterior", () => {
  it("returns the prior-initialized posterior before any fit", async () => {
    const handle = unwrap(await buildGraph(gmmSpec()));
    unwrap(observe(handle, "y", gmmData(), [500, 2]));
    const posterior = unwrap(await getPosterior(handle, "alpha"));
    expect(posterior.natural[0].shape).toEqual([5]);
    for (const phi of posterior.natural[0].data)
      expect(phi + 1).toBeCloseTo(0.01, 12);
    unwrap(releaseHandle(handle));
  }, 120000);

  it("returns fitted concentrations of length K", async () => {
    const handle = unwrap(await buildGraph(gmmSpec()));
    unwrap(observe(handle, "y", gmmData(), [500, 2]));
    unwrap(await fit(handle, JSON.stringify({ seed: 7 })));
    const posterior = unwrap(await getPosterior(handle, "alpha"));
    expect(posterior.natural[0].shape).toEqual([5]);
    const total = Array.from(posterior.natural[0].data).reduce(
      (a, b) => a + b + 1,
      0
    );
    expect(total).toBeCloseTo(500.05, 6);
    // buffers are copies: mutating them cannot corrupt later reads
    posterior.natural[0].data.fill(0);
    const again = unwrap(await getPosterior(handle, "alpha"));
    expect(again.natural[0].data[0]).not.toBe(0);
    unwrap(releaseHandle(handle));
  }, 120000);

  it("reports UNKNOWN_NODE for missing names", async () => {
    const handle = unwrap(await buildGraph(gmmSpec()));
    unwrap(observe(handle, "y", gmmData(), [500, 2]));
    expectError(await getPosterior(handle, "ghost"), "UNKNOWN_NODE");
    unwrap(releaseHandle(handle));
  }, 120000);
});
