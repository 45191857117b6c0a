var x = 7;
if (x > 3) { print("big"); } else { print("small"); }
