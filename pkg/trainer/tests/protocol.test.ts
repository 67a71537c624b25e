import { describe, expect, it } from "vitest";
import {
  LineFramer,
  OBS_DIM,
  actByIndex,
  helloAck,
  maskOf,
  obsToVector,
  parseRecord,
} from "../src/protocol";

describe("line framing", () => {
  it("reassembles records split across chunks", () => {
    const f = new LineFramer();
    expect(f.push('{"type":"ob')).toEqual([]);
    expect(f.push('s","episode":0}\n{"type":"st')).toEqual([
      '{"type":"obs","episode":0}',
    ]);
    expect(f.push('ep"}\n')).toEqual(['{"type":"step"}']);
  });

  it("rejects garbage records", () => {
    expect(() => parseRecord("[1,2,3]")).toThrow();
    expect(() => parseRecord('{"no_type":1}')).toThrow();
  });
});

describe("observation vectorization", () => {
  it("normalizes and preserves the mask", () => {
    const rec: any = {
      type: "obs",
      episode: 0,
      step: 0,
      scan: new Array(500).fill(4.0),
      target: [2.0, 1.0, 0.0, 1.0, 0.0],
      mask: new Array(42).fill(0).map((_, i) => (i % 2 ? 1 : 0)),
    };
    const v = obsToVector(rec);
    expect(v.length).toBe(OBS_DIM);
    expect(v[0]).toBeCloseTo(0.5);
    expect(v[500]).toBeCloseTo(0.25);
    const m = maskOf(v);
    expect(m[0]).toBe(0);
    expect(m[1]).toBe(1);
  });
});

describe("client records", () => {
  it("builds handshake and action lines", () => {
    expect(JSON.parse(helloAck(40))).toMatchObject({
      type: "hello_ack",
      version: 1,
      curriculum_switch: 40,
    });
    expect(JSON.parse(actByIndex(7))).toEqual({ type: "act", index: 7 });
  });
});
