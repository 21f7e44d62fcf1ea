/**
 * The buffer-health gauge: how many seconds of music are queued ahead
 * of the playhead.  Green when comfortably ahead, amber when thinning,
 * red at zero (an underrun — the radio analogy: the signal dropped).
 */

export interface MeterReading {
  /** 0..1 fill of the gauge. */
  fill: number;
  color: "green" | "amber" | "red";
  label: string;
}

/** Pure: seconds queued ahead + the gauge's full-scale → a reading. */
export function meterReading(bufferedS: number, fullScaleS: number): MeterReading {
  const fill = Math.max(0, Math.min(1, bufferedS / fullScaleS));
  const color = bufferedS <= 0.001 ? "red" : bufferedS < 0.25 * fullScaleS ? "amber" : "green";
  return { fill, color, label: `${bufferedS.toFixed(1)}s buffered` };
}

const COLORS = { green: "#3fb950", amber: "#d29922", red: "#e8524a" } as const;

export function drawMeter(
  canvas: HTMLCanvasElement,
  bufferedS: number,
  fullScaleS: number,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width, height } = canvas;
  const reading = meterReading(bufferedS, fullScaleS);
  ctx.fillStyle = "#14161c";
  ctx.fillRect(0, 0, width, height);
  ctx.fillStyle = COLORS[reading.color];
  ctx.fillRect(0, 0, width * reading.fill, height);
  ctx.fillStyle = "#e6e6e6";
  ctx.font = "12px system-ui, sans-serif";
  ctx.textBaseline = "middle";
  ctx.fillText(reading.label, 8, height / 2);
}
