/** Double-handle range slider for the 90% credible interval.
 *
 * Handles collide rather than cross, so the emitted interval always
 * satisfies y_min <= y_max; a zero-width interval disables submission.
 */

export interface SliderState {
  domainMin: number;
  domainMax: number;
  yMin: number;
  yMax: number;
}

export interface RangeSlider {
  root: HTMLElement;
  state(): SliderState;
  setMin(value: number): void;
  setMax(value: number): void;
  /** Pointer-style update: move the nearer handle toward the value. */
  pointer(value: number): void;
  canSubmit(): boolean;
  onChange(listener: (state: SliderState) => void): void;
}

function clamp(value: number, lo: number, hi: number): number {
  return Math.min(Math.max(value, lo), hi);
}

export function createRangeSlider(
  domainMin: number,
  domainMax: number,
  initialMin?: number,
  initialMax?: number,
): RangeSlider {
  if (!(domainMax > domainMin)) {
    throw new Error("slider domain must have positive width");
  }
  let yMin = clamp(initialMin ?? domainMin, domainMin, domainMax);
  let yMax = clamp(initialMax ?? domainMax, domainMin, domainMax);
  if (yMin > yMax) [yMin, yMax] = [yMax, yMin];

  const listeners: ((state: SliderState) => void)[] = [];
  const root = document.createElement("div");
  root.className = "range-slider";
  const low = document.createElement("div");
  low.className = "handle handle-min";
  const high = document.createElement("div");
  high.className = "handle handle-max";
  const label = document.createElement("div");
  label.className = "range-label";
  root.append(low, high, label);

  function state(): SliderState {
    return { domainMin, domainMax, yMin, yMax };
  }

  function render() {
    low.setAttribute("data-value", String(yMin));
    high.setAttribute("data-value", String(yMax));
    label.textContent = `${yMin} – ${yMax}`;
    for (const listener of listeners) listener(state());
  }

  function setMin(value: number) {
    yMin = clamp(value, domainMin, yMax); // collide, never cross
    render();
  }

  function setMax(value: number) {
    yMax = clamp(value, yMin, domainMax);
    render();
  }

  function pointer(value: number) {
    const v = clamp(value, domainMin, domainMax);
    if (Math.abs(v - yMin) <= Math.abs(v - yMax)) setMin(v);
    else setMax(v);
  }

  render();
  return {
    root,
    state,
    setMin,
    setMax,
    pointer,
    canSubmit: () => yMax > yMin,
    onChange: (listener) => listeners.push(listener),
  };
}
