/**
 * Foreign-function layer over the vmplite engine.
 *
 * Graphs are built, observed, fitted and inspected exclusively through the
 * engine's external interfaces: the JSON model-spec schema, headerless CSV
 * data files, and the posterior-dump JSON that `vmplite fit` writes.  Every
 * call returns a structured result — `{ok: true, value}` or
 * `{ok: false, code, message}` — and never throws across the boundary.
 *
 * Numeric data crosses as contiguous row-major Float64Array buffers with an
 * explicit shape; masks as Uint8Array (1 = observed).  A handle may be used
 * by one caller at a time: concurrent calls report BUSY instead of blocking.
 */

import { execFile } from "node:child_process";
import { promisify } from "node:util";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

const execFileAsync = promisify(execFile);

export type ErrorCode =
  | "PARSE"
  | "VALIDATION"
  | "STALE_HANDLE"
  | "SHAPE"
  | "SUPPORT"
  | "CONFIG"
  | "NUMERIC"
  | "UNKNOWN_NODE"
  | "BUSY"
  | "IO";

export type Result<T> =
  | { ok: true; value: T }
  | { ok: false; code: ErrorCode; message: string };

export type EngineHandle = number;

export interface Block {
  data: Float64Array;
  shape: number[];
}

export interface Posterior {
  family: string;
  plates: number[];
  natural: Block[];
  moments: Block[];
}

export interface FitReport {
  elbo_trace: number[];
  sweeps: number;
  converged: boolean;
  ms_per_sweep: number[];
}

interface NodeDecl {
  name: string;
  kind?: string;
  family?: string;
  parents?: unknown[];
  plates?: number[];
  constant?: unknown;
  dim?: number;
}

interface SpecDoc {
  nodes: NodeDecl[];
  observe?: { node: string; data?: string; missing_token?: string }[];
  engine?: Record<string, unknown>;
}

interface HandleState {
  spec: SpecDoc;
  workdir: string;
  observations: Map<string, string>; // node name -> csv path
  lastDump: DumpDoc | null;
  busy: boolean;
}

interface DumpDoc {
  nodes: Record<
    string,
    { family: string; plates: number[]; natural: unknown[]; moments: unknown[] }
  >;
  elbo_trace: number[];
  sweeps: number;
  converged: boolean;
  ms_per_sweep: number[];
}

const registry = new Map<EngineHandle, HandleState>();
let nextHandle = 1;

const err = <T>(code: ErrorCode, message: string): Result<T> => ({
  ok: false,
  code,
  message,
});

function pythonCommand(): string {
  return process.env.VMPLITE_PYTHON ?? "python3";
}

async function runCli(
  args: string[],
  cwd: string
): Promise<{ code: number; stdout: string; stderr: string }> {
  try {
    const { stdout, stderr } = await execFileAsync(
      pythonCommand(),
      ["-m", "vmplite.cli", ...args],
      { cwd, maxBuffer: 1 << 26 }
    );
    return { code: 0, stdout, stderr };
  } catch (e) {
    const anyE = e as { code?: number; stdout?: string; stderr?: string };
    return {
      code: typeof anyE.code === "number" ? anyE.code : -1,
      stdout: anyE.stdout ?? "",
      stderr: anyE.stderr ?? String(e),
    };
  }
}

function getState(handle: EngineHandle): HandleState | undefined {
  return registry.get(handle);
}

// ---------------------------------------------------------------------------
// shape bookkeeping mirrored from the spec schema
// ---------------------------------------------------------------------------

function literalShape(value: unknown): number[] {
  const dims: number[] = [];
  let v = value;
  while (Array.isArray(v)) {
    dims.push(v.length);
    v = v[0];
  }
  return dims;
}

function lastDim(value: unknown): number {
  const dims = literalShape(value);
  return dims.length ? dims[dims.length - 1] : 1;
}

function findDecl(spec: SpecDoc, name: string): NodeDecl | undefined {
  return spec.nodes.find((n) => n.name === name);
}

function parentDim(spec: SpecDoc, parent: unknown, matrix = false): number {
  if (typeof parent === "string") {
    const decl = findDecl(spec, parent);
    if (!decl) return 1;
    if (decl.kind === "sum_product") return 1;
    if (decl.kind === "constant") return lastDim(decl.constant);
    if (decl.family === "gaussian") return gaussianDim(spec, decl);
    return 1;
  }
  if (matrix || Array.isArray(parent)) return lastDim(parent);
  return 1;
}

function gaussianDim(spec: SpecDoc, decl: NodeDecl): number {
  if (decl.dim) return decl.dim;
  const parents = decl.parents ?? [];
  const meanIndex = decl.kind === "mixture" ? 1 : 0;
  return parentDim(spec, parents[meanIndex]);
}

/** Event shape of an observed value per family, [] when cells are scalar. */
function eventShape(spec: SpecDoc, decl: NodeDecl): number[] {
  switch (decl.family) {
    case "gaussian": {
      const d = gaussianDim(spec, decl);
      return d > 1 ? [d] : [];
    }
    case "wishart": {
      const parents = decl.parents ?? [];
      const d = decl.dim ?? parentDim(spec, parents[1], true);
      return [d, d];
    }
    case "dirichlet": {
      const parents = decl.parents ?? [];
      const d = decl.dim ?? parentDim(spec, parents[0]);
      return [d];
    }
    default:
      return []; // gamma values and categorical indices are scalar cells
  }
}

function sameShape(a: number[], b: number[]): boolean {
  return a.length === b.length && a.every((x, i) => x === b[i]);
}

function product(xs: number[]): number {
  return xs.reduce((a, b) => a * b, 1);
}

// ---------------------------------------------------------------------------
// graph construction
// ---------------------------------------------------------------------------

/** Validate a spec document and register a fresh engine handle for it. */
export async function buildGraph(
  specJson: string
): Promise<Result<EngineHandle>> {
  let spec: SpecDoc;
  try {
    spec = JSON.parse(specJson) as SpecDoc;
  } catch (e) {
    return err("PARSE", `model spec is not valid JSON: ${String(e)}`);
  }
  let workdir: string;
  try {
    workdir = fs.mkdtempSync(path.join(os.tmpdir(), "vmplite-ffi-"));
    fs.writeFileSync(path.join(workdir, "spec.json"), specJson);
  } catch (e) {
    return err("IO", String(e));
  }
  const result = await runCli(
    ["validate", path.join(workdir, "spec.json")],
    workdir
  );
  if (result.code !== 0) {
    fs.rmSync(workdir, { recursive: true, force: true });
    return err("VALIDATION", result.stderr.trim() || "spec rejected");
  }
  const handle = nextHandle++;
  registry.set(handle, {
    spec,
    workdir,
    observations: new Map(),
    lastDump: null,
    busy: false,
  });
  return { ok: true, value: handle };
}

// ---------------------------------------------------------------------------
// observation binding
// ---------------------------------------------------------------------------

function checkSupport(
  decl: NodeDecl,
  spec: SpecDoc,
  data: Float64Array,
  mask: Uint8Array | null
): string | null {
  for (let i = 0; i < data.length; i++) {
    if (mask && mask[i] === 0) continue;
    const x = data[i];
    if (!Number.isFinite(x)) return `cell ${i} is not finite`;
    if (decl.family === "gamma" && x <= 0) return `cell ${i} must be > 0`;
    if (decl.family === "categorical") {
      const k = parentDim(spec, (decl.parents ?? [])[0]);
      if (!Number.isInteger(x) || x < 0 || x >= k)
        return `cell ${i} is not a category index in [0, ${k})`;
    }
  }
  return null;
}

function writeCsv(
  file: string,
  shape: number[],
  data: Float64Array,
  mask: Uint8Array | null
): void {
  const rows = shape.length > 0 ? shape[0] : 1;
  const cols = data.length / (rows || 1);
  const lines: string[] = [];
  for (let r = 0; r < rows; r++) {
    const cells: string[] = [];
    for (let c = 0; c < cols; c++) {
      const i = r * cols + c;
      cells.push(mask && mask[i] === 0 ? "NA" : String(data[i]));
    }
    lines.push(cells.join(","));
  }
  fs.writeFileSync(file, lines.join("\n") + "\n");
}

/**
 * Bind a row-major data buffer (and optional element mask) to a node.
 * The shape must equal the node's plates, optionally extended by its
 * event shape.
 */
export function observe(
  handle: EngineHandle,
  nodeName: string,
  data: Float64Array,
  shape: number[],
  mask: Uint8Array | null = null
): Result<null> {
  const state = getState(handle);
  if (!state) return err("STALE_HANDLE", `handle ${handle} is not live`);
  if (state.busy) return err("BUSY", "handle is in use");
  const decl = findDecl(state.spec, nodeName);
  if (!decl) return err("UNKNOWN_NODE", `no node named '${nodeName}'`);
  if (decl.kind === "constant" || decl.kind === "sum_product")
    return err("SHAPE", `node '${nodeName}' cannot be observed`);
  const plates = decl.plates ?? [];
  const event = eventShape(state.spec, decl);
  const accepted = [[...plates, ...event]];
  if (event.length > 0) accepted.push([...plates]);
  if (!accepted.some((s) => sameShape(s, shape)))
    return err(
      "SHAPE",
      `shape [${shape}] does not match node '${nodeName}' ` +
        `(expected [${accepted[0]}])`
    );
  if (data.length !== product(shape))
    return err(
      "SHAPE",
      `buffer holds ${data.length} values, shape [${shape}] needs ` +
        `${product(shape)}`
    );
  if (mask && mask.length !== data.length)
    return err(
      "SHAPE",
      `mask holds ${mask.length} flags for ${data.length} values`
    );
  const support = checkSupport(decl, state.spec, data, mask);
  if (support) return err("SUPPORT", support);
  const file = path.join(state.workdir, `${nodeName}.csv`);
  try {
    writeCsv(file, shape, data, mask);
  } catch (e) {
    return err("IO", String(e));
  }
  state.observations.set(nodeName, file);
  state.lastDump = null;
  return { ok: true, value: null };
}

// ---------------------------------------------------------------------------
// fitting
// ---------------------------------------------------------------------------

function effectiveSpec(
  state: HandleState,
  engineOverrides: Record<string, unknown>
): Result<SpecDoc> {
  const spec: SpecDoc = JSON.parse(JSON.stringify(state.spec));
  const observeEntries: { node: string; data: string; missing_token: string }[] =
    [];
  const declared = new Map(
    (spec.observe ?? []).map((o) => [o.node, o] as const)
  );
  for (const [node, file] of state.observations) {
    observeEntries.push({ node, data: file, missing_token: "NA" });
    declared.delete(node);
  }
  for (const [node, entry] of declared) {
    if (!entry.data || !path.isAbsolute(entry.data))
      return err(
        "CONFIG",
        `observed node '${node}' has no bound data ` +
          `(bind a buffer or declare an absolute path)`
      );
    observeEntries.push({
      node,
      data: entry.data,
      missing_token: entry.missing_token ?? "NA",
    });
  }
  if (observeEntries.length === 0)
    return err("CONFIG", "no observations are bound to this graph");
  spec.observe = observeEntries;
  spec.engine = { ...(spec.engine ?? {}), ...engineOverrides };
  return { ok: true, value: spec };
}

function toFitReport(dump: DumpDoc): FitReport {
  return {
    elbo_trace: dump.elbo_trace,
    sweeps: dump.sweeps,
    converged: dump.converged,
    ms_per_sweep: dump.ms_per_sweep,
  };
}

async function runFit(
  state: HandleState,
  spec: SpecDoc,
  extraArgs: string[]
): Promise<Result<DumpDoc>> {
  const specPath = path.join(state.workdir, "spec_effective.json");
  const dumpPath = path.join(state.workdir, "dump.json");
  try {
    fs.writeFileSync(specPath, JSON.stringify(spec));
    fs.rmSync(dumpPath, { force: true });
  } catch (e) {
    return err("IO", String(e));
  }
  const result = await runCli(
    ["fit", specPath, "--output", dumpPath, ...extraArgs],
    state.workdir
  );
  if (result.code === 1) return err("CONFIG", result.stderr.trim());
  if (result.code === 2) return err("NUMERIC", result.stderr.trim());
  if (result.code !== 0 && result.code !== 3)
    return err("IO", result.stderr.trim() || `engine exited ${result.code}`);
  try {
    const dump = JSON.parse(fs.readFileSync(dumpPath, "utf-8")) as DumpDoc;
    return { ok: true, value: dump };
  } catch (e) {
    return err("IO", `cannot read posterior dump: ${String(e)}`);
  }
}

/**
 * Run inference with the spec's engine settings merged with `optionsJson`
 * ({mode, max_sweeps, tol, seed, schedule, initialize}); returns the fit
 * report as a JSON string.
 */
export async function fit(
  handle: EngineHandle,
  optionsJson = "{}"
): Promise<Result<string>> {
  const state = getState(handle);
  if (!state) return err("STALE_HANDLE", `handle ${handle} is not live`);
  if (state.busy) return err("BUSY", "handle is in use");
  let options: Record<string, unknown>;
  try {
    options = JSON.parse(optionsJson) as Record<string, unknown>;
  } catch (e) {
    return err("CONFIG", `fit options are not valid JSON: ${String(e)}`);
  }
  const specResult = effectiveSpec(state, options);
  if (!specResult.ok) return specResult;
  const spec = specResult.value;
  const engineDecl = spec.engine ?? {};
  const mode = (engineDecl.mode as string) ?? "vb";
  const schedule = engineDecl.schedule as Record<string, unknown> | undefined;
  if (mode === "svi" && (!schedule || Object.keys(schedule).length === 0))
    return err("CONFIG", "svi mode requires a schedule");
  if (mode === "annealed" && (!schedule || !Array.isArray(schedule.betas)))
    return err("CONFIG", "annealed mode requires schedule.betas");
  state.busy = true;
  try {
    const result = await runFit(state, spec, []);
    if (!result.ok) return result;
    state.lastDump = result.value;
    return { ok: true, value: JSON.stringify(toFitReport(result.value)) };
  } finally {
    state.busy = false;
  }
}

// ---------------------------------------------------------------------------
// posterior retrieval
// ---------------------------------------------------------------------------

function toBlock(nested: unknown): Block {
  const shape = literalShape(nested);
  const flat = new Float64Array(product(shape));
  let i = 0;
  const walk = (v: unknown): void => {
    if (Array.isArray(v)) {
      for (const x of v) walk(x);
    } else {
      flat[i++] = v as number;
    }
  };
  walk(nested);
  return { data: flat, shape };
}

/**
 * Posterior natural parameters and moments of one node, as copied buffers.
 * Before any fit this reports the initialized (prior) posterior.
 */
export async function getPosterior(
  handle: EngineHandle,
  nodeName: string
): Promise<Result<Posterior>> {
  const state = getState(handle);
  if (!state) return err("STALE_HANDLE", `handle ${handle} is not live`);
  if (state.busy) return err("BUSY", "handle is in use");
  if (!state.lastDump) {
    state.busy = true;
    try {
      const specResult = effectiveSpec(state, {});
      if (!specResult.ok) return specResult;
      const result = await runFit(state, specResult.value, ["--init-dump"]);
      if (!result.ok) return result;
      state.lastDump = result.value;
    } finally {
      state.busy = false;
    }
  }
  const entry = state.lastDump.nodes[nodeName];
  if (!entry)
    return err(
      "UNKNOWN_NODE",
      `no posterior for '${nodeName}' (constants and fully observed nodes ` +
        `carry none)`
    );
  return {
    ok: true,
    value: {
      family: entry.family,
      plates: entry.plates,
      natural: entry.natural.map(toBlock),
      moments: entry.moments.map(toBlock),
    },
  };
}

/** Release a handle and its scratch files; further use reports STALE_HANDLE. */
export function releaseHandle(handle: EngineHandle): Result<null> {
  const state = getState(handle);
  if (!state) return err("STALE_HANDLE", `handle ${handle} is not live`);
  if (state.busy) return err("BUSY", "handle is in use");
  fs.rmSync(state.workdir, { recursive: true, force: true });
  registry.delete(handle);
  return { ok: true, value: null };
}
