import { readFileSync } from "fs";
import Papa from "papaparse";

export class SchemaError extends Error {}

export interface Table {
  path: string;
  columns: string[];
  rows: Record<string, string>[];
}

/** Load a results CSV, skipping the `#` preamble; empty data is an error. */
export function loadTable(path: string): Table {
  let text: string;
  try {
    text = readFileSync(path, "utf8");
  } catch (err) {
    throw new SchemaError(`cannot read ${path}: ${(err as Error).message}`);
  }
  const body = text
    .split("\n")
    .filter((line) => !line.startsWith("#"))
    .join("\n")
    .trim();
  if (body.length === 0) {
    throw new SchemaError(`${path}: no data (empty file or comments only)`);
  }
  const parsed = Papa.parse<Record<string, string>>(body, {
    header: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    throw new SchemaError(`${path}: ${parsed.errors[0].message}`);
  }
  const columns = parsed.meta.fields ?? [];
  if (parsed.data.length === 0) {
    throw new SchemaError(`${path}: header only, no data rows`);
  }
  return { path, columns, rows: parsed.data };
}

/** Fail loudly, naming every missing column. */
export function requireColumns(table: Table, required: string[]): void {
  const missing = required.filter((c) => !table.columns.includes(c));
  if (missing.length > 0) {
    throw new SchemaError(
      `${table.path}: missing column(s) ${missing.join(", ")} ` +
        `(found: ${table.columns.join(", ")})`
    );
  }
}

/** Numeric cell access; blank cells come back as null. */
export function num(row: Record<string, string>, column: string): number | null {
  const raw = (row[column] ?? "").trim();
  if (raw === "") return null;
  const val = Number(raw);
  if (!Number.isFinite(val)) {
    throw new SchemaError(`bad numeric value '${raw}' in column ${column}`);
  }
  return val;
}

export function numStrict(row: Record<string, string>, column: string): number {
  const val = num(row, column);
  if (val === null) {
    throw new SchemaError(`empty value in required numeric column ${column}`);
  }
  return val;
}
