var s = "hello";
print(sub(s, 1, 3));
print(len(s));
